#include "fusion_mammo/error.hpp"

namespace fusion_mammo {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::dimension: return "dimension error";
    case ErrorKind::argument: return "argument error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::state: return "state error";
    case ErrorKind::format: return "format error";
    case ErrorKind::data: return "data error";
    case ErrorKind::ingestion: return "ingestion error";
    case ErrorKind::construction: return "construction error";
  }
  return "error";
}

}  // namespace fusion_mammo
