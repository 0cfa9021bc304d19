#pragma once

// JSON forms of the small value types shared by configs and checkpoints.

#include <set>
#include <string>

#include <json.hpp>

#include "memcore/device.hpp"
#include "memcore/layer.hpp"

namespace memcore::jsonio {

using nlohmann::json;

/// Throws ConfigError naming the first key of `j` not in `allowed`.
void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where);

/// null for a disabled quantizer, else {"bits", "lo", "hi"}; reading also
/// accepts {"fixed": [bits, frac_bits]}.
[[nodiscard]] json quantizer_to_json(const layer::Quantizer& q);
[[nodiscard]] layer::Quantizer quantizer_from_json(const json& j);

[[nodiscard]] json device_to_json(const device::DeviceParams& p);
/// Missing keys keep the values of `base`.
[[nodiscard]] device::DeviceParams device_from_json(const json& j,
                                                    device::DeviceParams base = {});

}  // namespace memcore::jsonio
