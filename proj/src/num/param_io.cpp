#include "rclab/num/param_io.hpp"

#include "rclab/util/binary_io.hpp"

namespace rclab::num {

nlohmann::json append_params(const ParamSet& ps, std::vector<unsigned char>& payload) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& e : ps.entries()) {
    table.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"offset", payload.size()}, {"trainable", e.trainable}});
    util::append_f32_le(payload, e.value.data());
  }
  return table;
}

ParamSet parse_params(const nlohmann::json& table, std::span<const unsigned char> payload) {
  ParamSet ps;
  for (const auto& e : table) {
    const Shape shape = e.at("shape").get<Shape>();
    const std::size_t off = e.at("offset").get<std::size_t>();
    const std::size_t bytes = shape_size(shape) * 4;
    if (off > payload.size() || payload.size() - off < bytes) {
      throw CorruptionError("tensor '" + e.at("name").get<std::string>() + "' extends beyond the payload");
    }
    ps.add(e.at("name").get<std::string>(), Tensor(shape, util::parse_f32_le(payload.subspan(off, bytes))),
           e.value("trainable", true));
  }
  return ps;
}

}  // namespace rclab::num
