#include "mflab/kernel_registry.hpp"

#include <functional>
#include <map>
#include <memory>

#include "mflab/errors.hpp"

namespace mflab {
namespace {

using B = Basis1D;

PolynomialFunctional product_of(std::string id, std::vector<B> bases, double c = 1.0) {
  std::vector<Factor1D> factors;
  for (B b : bases) factors.push_back({b});
  const std::size_t n = factors.size();
  return PolynomialFunctional(std::make_shared<SeparableKernel>(n, std::vector<SeparableKernel::Term>{{c, factors}}),
                              std::move(id));
}

const std::map<std::string, std::function<PolynomialFunctional()>, std::less<>>& registry() {
  static const std::map<std::string, std::function<PolynomialFunctional()>, std::less<>> table = {
      {"constant", [] { return product_of("constant", {}); }},
      {"mean", [] { return product_of("mean", {B::Identity}); }},
      {"second_moment", [] { return product_of("second_moment", {B::Square}); }},
      {"third_moment", [] { return product_of("third_moment", {B::Cube}); }},
      {"mean_squared", [] { return product_of("mean_squared", {B::Identity, B::Identity}); }},
      {"mean_cubed", [] { return product_of("mean_cubed", {B::Identity, B::Identity, B::Identity}); }},
      {"sin_mean", [] { return product_of("sin_mean", {B::Sin}); }},
      {"cos_mean", [] { return product_of("cos_mean", {B::Cos}); }},
      {"tanh_mean", [] { return product_of("tanh_mean", {B::Tanh}); }},
      {"sin_mean_squared", [] { return product_of("sin_mean_squared", {B::Sin, B::Sin}); }},
      {"tanh_mean_cubed", [] { return product_of("tanh_mean_cubed", {B::Tanh, B::Tanh, B::Tanh}); }},
      {"sin_cos_mixed",
       [] {
         // Deliberately non-symmetric in its two slots.
         std::vector<SeparableKernel::Term> terms{
             {1.0, {{B::Sin}, {B::Cos}}},
             {0.5, {{B::Tanh}, {B::One}}},
             {-0.25, {{B::Cos}, {B::Tanh}}},
         };
         return PolynomialFunctional(std::make_shared<SeparableKernel>(2, std::move(terms)), "sin_cos_mixed");
       }},
      {"bounded_cubic",
       [] {
         std::vector<SeparableKernel::Term> terms{
             {1.0, {{B::Sin}, {B::Tanh}, {B::Cos}}},
             {0.5, {{B::Tanh}, {B::Tanh}, {B::Sin}}},
         };
         return PolynomialFunctional(std::make_shared<SeparableKernel>(3, std::move(terms)), "bounded_cubic");
       }},
  };
  return table;
}

}  // namespace

PolynomialFunctional builtin_functional(std::string_view id) {
  const auto& table = registry();
  auto it = table.find(id);
  if (it == table.end()) throw RegistryError("unknown functional id \"" + std::string(id) + "\"");
  return it->second();
}

std::vector<std::string> builtin_functional_ids() {
  std::vector<std::string> ids;
  for (const auto& [k, v] : registry()) ids.push_back(k);
  return ids;
}

}  // namespace mflab
