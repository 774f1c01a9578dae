#pragma once

#include <string>
#include <vector>

#include "nls/models.hpp"
#include "nls/operator_core.hpp"

namespace nls {

struct Resolution {
  int n = 200;      // nodes per axis
  int steps = 400;  // time steps per period
};

bool is_operator_preset(const std::string& name);
bool is_zika_preset(const std::string& name);
bool is_stemcell_preset(const std::string& name);
std::vector<std::string> preset_names();

// SCEN-A .. SCEN-F and SCEN-L / SCEN-L2 (Lipschitz non-smooth scalar / 2x2).
OperatorSpec make_scenario(const std::string& name, const Resolution& res);

// Z-(i), Z-(ii), Z-(iii)
ZikaParams make_zika_preset(const std::string& name, const Resolution& res);

// S-n0-decay, S-n0-neutral, S-n2-persist
StemCellParams make_stemcell_preset(const std::string& name, const Resolution& res);

}  // namespace nls
