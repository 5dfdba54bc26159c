#include "fusion_mammo/pipeline/report.hpp"

#include <json.hpp>

#include <cstdio>
#include <sstream>

#include "fusion_mammo/error.hpp"

namespace fusion_mammo::pipeline {
namespace {

constexpr const char* kClassNames[2] = {"benign", "malignant"};

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string format_fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_fixed(*v, 4) : "undefined"; }

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::size_t EvalReport::total() const {
  return confusion[0][0] + confusion[0][1] + confusion[1][0] + confusion[1][1];
}

EvalReport compute_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ArgumentError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw ArgumentError("compute_metrics: empty input");
  EvalReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) throw ArgumentError("compute_metrics: class outside {0,1}");
    ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  r.test_size = labels.size();
  r.accuracy = static_cast<double>(r.confusion[0][0] + r.confusion[1][1]) / static_cast<double>(labels.size());
  for (std::size_t c = 0; c < 2; ++c) {
    r.precision[c] = ratio(r.confusion[c][c], r.confusion[0][c] + r.confusion[1][c]);
    r.recall[c] = ratio(r.confusion[c][c], r.confusion[c][0] + r.confusion[c][1]);
  }
  return r;
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["classifier"] = r.classifier;
  j["feature_set"] = r.feature_set;
  j["feature_length"] = r.feature_length;
  j["train_size"] = r.train_size;
  j["test_size"] = r.test_size;
  j["accuracy"] = r.accuracy;
  j["confusion_matrix"] = {{"rows", "true class"},
                           {"columns", "predicted class"},
                           {"classes", {kClassNames[0], kClassNames[1]}},
                           {"counts", {{r.confusion[0][0], r.confusion[0][1]}, {r.confusion[1][0], r.confusion[1][1]}}}};
  for (std::size_t c = 0; c < 2; ++c) {
    j["per_class"][kClassNames[c]] = {{"precision", optional_json(r.precision[c])},
                                      {"recall", optional_json(r.recall[c])}};
  }
  j["config_fingerprint"] = r.config_fingerprint;
  j["network_fingerprint"] = r.network_fingerprint;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.classifier = j.at("classifier").get<std::string>();
    r.feature_set = j.at("feature_set").get<std::string>();
    r.feature_length = j.at("feature_length").get<std::size_t>();
    r.train_size = j.at("train_size").get<std::size_t>();
    r.test_size = j.at("test_size").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    const auto& counts = j.at("confusion_matrix").at("counts");
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t p = 0; p < 2; ++p) r.confusion[t][p] = counts.at(t).at(p).get<std::size_t>();
    }
    for (std::size_t c = 0; c < 2; ++c) {
      const auto& pc = j.at("per_class").at(kClassNames[c]);
      if (!pc.at("precision").is_null()) r.precision[c] = pc.at("precision").get<double>();
      if (!pc.at("recall").is_null()) r.recall[c] = pc.at("recall").get<double>();
    }
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    r.network_fingerprint = j.at("network_fingerprint").get<std::string>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (r.total() != r.test_size) throw FormatError("report: confusion matrix total differs from test size");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream out;
  out << "classifier      " << r.classifier << "\n"
      << "feature set     " << r.feature_set << " (" << r.feature_length << " values)\n"
      << "train / test    " << r.train_size << " / " << r.test_size << "\n"
      << "accuracy        " << format_fixed(r.accuracy, 4) << "\n\n"
      << "confusion (rows: true, columns: predicted)\n"
      << "                 benign  malignant\n";
  for (std::size_t t = 0; t < 2; ++t) {
    char line[96];
    std::snprintf(line, sizeof(line), "  %-12s %8zu %10zu\n", kClassNames[t], r.confusion[t][0], r.confusion[t][1]);
    out << line;
  }
  out << "\nclass        precision     recall\n";
  for (std::size_t c = 0; c < 2; ++c) {
    char line[96];
    std::snprintf(line, sizeof(line), "  %-10s %10s %10s\n", kClassNames[c], format_optional(r.precision[c]).c_str(),
                  format_optional(r.recall[c]).c_str());
    out << line;
  }
  out << "\nconfig fingerprint   " << r.config_fingerprint << "\n";
  if (!r.network_fingerprint.empty()) out << "network fingerprint  " << r.network_fingerprint << "\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  return out.str();
}

std::string report_to_svg(const EvalReport& r) {
  constexpr int kCell = 120, kLeft = 150, kTop = 90;
  std::size_t peak = 1;
  for (const auto& row : r.confusion) {
    for (std::size_t v : row) peak = std::max(peak, v);
  }
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kLeft + 2 * kCell + 30 << "\" height=\""
    << kTop + 2 * kCell + 60 << "\" font-family=\"sans-serif\">\n"
    << "  <title>Confusion matrix: " << xml_escape(r.classifier) << ", " << xml_escape(r.feature_set)
    << " features</title>\n"
    << "  <text x=\"" << kLeft + kCell << "\" y=\"30\" text-anchor=\"middle\" font-size=\"16\">"
    << xml_escape(r.classifier) << " / " << xml_escape(r.feature_set) << ", accuracy "
    << format_fixed(r.accuracy, 4) << "</text>\n"
    << "  <text x=\"" << kLeft + kCell << "\" y=\"" << kTop - 35 << "\" text-anchor=\"middle\" font-size=\"13\">"
    << "predicted</text>\n";
  for (std::size_t c = 0; c < 2; ++c) {
    s << "  <text x=\"" << kLeft + static_cast<int>(c) * kCell + kCell / 2 << "\" y=\"" << kTop - 10
      << "\" text-anchor=\"middle\" font-size=\"13\">" << kClassNames[c] << "</text>\n"
      << "  <text x=\"" << kLeft - 10 << "\" y=\"" << kTop + static_cast<int>(c) * kCell + kCell / 2
      << "\" text-anchor=\"end\" font-size=\"13\">true " << kClassNames[c] << "</text>\n";
  }
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t p = 0; p < 2; ++p) {
      const std::size_t v = r.confusion[t][p];
      const int shade = 255 - static_cast<int>(200.0 * static_cast<double>(v) / static_cast<double>(peak));
      const int x = kLeft + static_cast<int>(p) * kCell;
      const int y = kTop + static_cast<int>(t) * kCell;
      s << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\"" << kCell
        << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"black\"/>\n"
        << "  <text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 6
        << "\" text-anchor=\"middle\" font-size=\"20\">" << v << "</text>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace fusion_mammo::pipeline
