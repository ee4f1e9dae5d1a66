#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gle/model.hpp"

namespace gle {

using Observable = std::function<double(const State&)>;

// Named test functions used by the experiments; throws on unknown names with
// the list of known ones. norm2 means |v|^2 + |z|^2 + |x|^2.
Observable make_observable(const std::string& name, const ModelParams& params);

std::vector<std::string> observable_names();

}  // namespace gle
