#pragma once

#include <string>

#include "pcrnn/data.hpp"
#include "pcrnn/dropout.hpp"
#include "pcrnn/pc_layer.hpp"

namespace pcrnn {

std::string to_string(CellType t);
std::string to_string(Activation a);
std::string to_string(Routing r);
std::string to_string(DropoutTarget t);
std::string to_string(TokenizerKind t);

CellType cell_type_from(const std::string& s);
Activation activation_from(const std::string& s);
Routing routing_from(const std::string& s);
DropoutTarget dropout_target_from(const std::string& s);
TokenizerKind tokenizer_from(const std::string& s);

}  // namespace pcrnn
