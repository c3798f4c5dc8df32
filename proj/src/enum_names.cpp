#include "pcrnn/enum_names.hpp"

#include "pcrnn/errors.hpp"

namespace pcrnn {

std::string to_string(CellType t) { return t == CellType::Lstm ? "lstm" : "rnn"; }

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
  }
  return "tanh";
}

std::string to_string(Routing r) { return r == Routing::Split ? "split" : "full"; }

std::string to_string(DropoutTarget t) {
  switch (t) {
    case DropoutTarget::Input: return "input";
    case DropoutTarget::Recurrent: return "recurrent";
    case DropoutTarget::Both: return "both";
  }
  return "recurrent";
}

std::string to_string(TokenizerKind t) { return t == TokenizerKind::Word ? "word" : "byte"; }

CellType cell_type_from(const std::string& s) {
  if (s == "lstm") return CellType::Lstm;
  if (s == "rnn") return CellType::NaiveRnn;
  throw ConfigError("unknown cell kind '" + s + "' (expected lstm or rnn)");
}

Activation activation_from(const std::string& s) {
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + s + "' (expected sigmoid, tanh or relu)");
}

Routing routing_from(const std::string& s) {
  if (s == "split") return Routing::Split;
  if (s == "full") return Routing::Full;
  throw ConfigError("unknown routing '" + s + "' (expected split or full)");
}

DropoutTarget dropout_target_from(const std::string& s) {
  if (s == "input") return DropoutTarget::Input;
  if (s == "recurrent") return DropoutTarget::Recurrent;
  if (s == "both") return DropoutTarget::Both;
  throw ConfigError("unknown dropout target '" + s + "' (expected input, recurrent or both)");
}

TokenizerKind tokenizer_from(const std::string& s) {
  if (s == "word") return TokenizerKind::Word;
  if (s == "byte") return TokenizerKind::Byte;
  throw ConfigError("unknown tokenizer '" + s + "' (expected word or byte)");
}

}  // namespace pcrnn
