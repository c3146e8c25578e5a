#ifndef LAP_ERRORS_HPP
#define LAP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lap {

// All library failures are typed exceptions. The CLI maps them to exit
// status 1 (runtime) or 2 (usage).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define LAP_DEFINE_ERROR(Name)                                  \
  struct Name : Error {                                         \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

// sexpr
LAP_DEFINE_ERROR(MalformedExpression);
LAP_DEFINE_ERROR(NodeNotFound);

// scfg
LAP_DEFINE_ERROR(GrammarParseError);
LAP_DEFINE_ERROR(UnproducibleNonterminal);
LAP_DEFINE_ERROR(DepthUnsatisfiable);
LAP_DEFINE_ERROR(BudgetExceeded);
LAP_DEFINE_ERROR(InsufficientNovelExamples);
LAP_DEFINE_ERROR(UncoverableRule);

// nncore
LAP_DEFINE_ERROR(ShapeMismatch);
LAP_DEFINE_ERROR(MissingGradient);

// encoders
LAP_DEFINE_ERROR(DimensionMismatch);
LAP_DEFINE_ERROR(FileUnreadable);
LAP_DEFINE_ERROR(EmptyInput);

// model
LAP_DEFINE_ERROR(EmptyMemory);
LAP_DEFINE_ERROR(SpanEmpty);
LAP_DEFINE_ERROR(RecursionLimitExceeded);
LAP_DEFINE_ERROR(ParseFailure);

// training
LAP_DEFINE_ERROR(MemoryRuleMissing);
LAP_DEFINE_ERROR(ReplayMismatch);

// harness
LAP_DEFINE_ERROR(LengthMismatch);
LAP_DEFINE_ERROR(ConfigError);

#undef LAP_DEFINE_ERROR

}  // namespace lap

#endif
