#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mflab/functional.hpp"

namespace mflab {

// Built-in polynomial functionals by id, e.g. "mean" (integral of x dm),
// "mean_squared" ((integral of x dm)^2), "sin_mean", "mean_cubed".
PolynomialFunctional builtin_functional(std::string_view id);
std::vector<std::string> builtin_functional_ids();

}  // namespace mflab
