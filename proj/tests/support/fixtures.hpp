#pragma once

#include <string>

#include "dcattack/case_ingest.hpp"
#include "dcattack/dc_model.hpp"

namespace fixtures {

inline std::string data_path(const std::string& rel) { return std::string(DCATTACK_DATA_DIR) + "/" + rel; }

inline std::string pglib(const std::string& name) { return data_path("pglib/pglib_opf_" + name + ".m"); }

inline dcattack::NetworkCase load(const std::string& path, dcattack::RatingColumn rating = dcattack::RatingColumn::kA) {
  dcattack::ParseOptions po;
  po.rating = rating;
  return dcattack::load_case(path, po);
}

}  // namespace fixtures
