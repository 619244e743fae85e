#pragma once

#include <stdexcept>
#include <string>

namespace verdoc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define VERDOC_DEFINE_ERROR(Name)                                 \
    class Name : public Error {                                   \
    public:                                                       \
        explicit Name(const std::string& what) : Error(what) {}   \
    }

// doctree
VERDOC_DEFINE_ERROR(MalformedDocument);
VERDOC_DEFINE_ERROR(SchemaViolation);
VERDOC_DEFINE_ERROR(PathNotFound);
VERDOC_DEFINE_ERROR(KindMismatch);
VERDOC_DEFINE_ERROR(NoPayloadAtSource);
VERDOC_DEFINE_ERROR(Unserializable);
// featurespace / properties
VERDOC_DEFINE_ERROR(EmptyVocabulary);
VERDOC_DEFINE_ERROR(DimensionMismatch);
// mlp
VERDOC_DEFINE_ERROR(NonFiniteWeights);
VERDOC_DEFINE_ERROR(CorruptModelFile);
// train / baselines
VERDOC_DEFINE_ERROR(NoRegions);
VERDOC_DEFINE_ERROR(ModeMismatch);
VERDOC_DEFINE_ERROR(Infeasible);
// attacks
VERDOC_DEFINE_ERROR(NoDonorForPath);
VERDOC_DEFINE_ERROR(BudgetExhausted);
VERDOC_DEFINE_ERROR(TriggerPathUnavailable);
// cli
VERDOC_DEFINE_ERROR(ConfigError);
VERDOC_DEFINE_ERROR(DataError);

#undef VERDOC_DEFINE_ERROR

}  // namespace verdoc
