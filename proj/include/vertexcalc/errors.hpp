#pragma once

#include <stdexcept>
#include <string>

namespace vertexcalc {

enum class ErrCode {
    RelationNotInSpan,
    VectorNotInSpan,
    InsufficientWindow,
    IllDefinedProduct,
    MixedWeight,
    WitnessCapExceeded,
    NonUniformWitness,
    ObstructionFound,
    NotCommutative,
    NotAssociative,
    NotUnital,
    NotDerivation,
    GradingMismatch,
    UnsoundData,
    Schema,
    Parse,
    Internal,
};

const char* err_code_name(ErrCode c);

/// Library-wide typed error. Checkers catch these and turn them into reports;
/// the CLI maps them onto its exit-code contract.
class VxError : public std::runtime_error {
  public:
    VxError(ErrCode code, const std::string& what)
        : std::runtime_error(std::string(err_code_name(code)) + ": " + what), code_(code) {}

    ErrCode code() const { return code_; }

  private:
    ErrCode code_;
};

[[noreturn]] inline void fail(ErrCode code, const std::string& what) {
    throw VxError(code, what);
}

}  // namespace vertexcalc
