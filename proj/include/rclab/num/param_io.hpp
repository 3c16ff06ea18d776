#pragma once

#include <vector>

#include "json.hpp"
#include "rclab/num/param_set.hpp"

namespace rclab::num {

// Appends the tensors of `ps` to `payload` as LE float32 and returns the
// tensor table [{name, shape, offset, trainable}] with byte offsets.
nlohmann::json append_params(const ParamSet& ps, std::vector<unsigned char>& payload);

// Inverse of append_params. Throws CorruptionError when an entry points
// outside the payload.
ParamSet parse_params(const nlohmann::json& table, std::span<const unsigned char> payload);

}  // namespace rclab::num
