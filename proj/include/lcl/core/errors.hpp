#pragma once

#include <stdexcept>
#include <string>

namespace lcl {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define LCL_DEFINE_ERROR(Name)                                        \
    struct Name : Error {                                             \
        explicit Name(const std::string& msg = #Name) : Error(msg) {} \
    }

LCL_DEFINE_ERROR(SingularMatrix);
LCL_DEFINE_ERROR(NoConvergence);
LCL_DEFINE_ERROR(UnknownTask);
LCL_DEFINE_ERROR(NoCachedForward);
LCL_DEFINE_ERROR(SelectionOutOfRange);
LCL_DEFINE_ERROR(SliceShapeMismatch);
LCL_DEFINE_ERROR(EmptyBatch);
LCL_DEFINE_ERROR(ZeroGradient);
LCL_DEFINE_ERROR(SingularFisher);
LCL_DEFINE_ERROR(CapacityReached);
LCL_DEFINE_ERROR(NotInitialized);
LCL_DEFINE_ERROR(NonSymmetricH);
LCL_DEFINE_ERROR(InvalidAction);
LCL_DEFINE_ERROR(SteppedAfterDone);
LCL_DEFINE_ERROR(InvalidConfig);
LCL_DEFINE_ERROR(EmptyReplay);
LCL_DEFINE_ERROR(EmptyReplaySet);
LCL_DEFINE_ERROR(DegenerateBaseline);
LCL_DEFINE_ERROR(MissingPhase);
LCL_DEFINE_ERROR(ConfigError);

#undef LCL_DEFINE_ERROR

}  // namespace lcl
