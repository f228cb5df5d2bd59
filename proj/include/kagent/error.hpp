#pragma once

#include <stdexcept>
#include <string>

namespace kagent {

// Root of every error the library throws on purpose. Subclasses name the
// failure; callers that only need "something went wrong" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define KAGENT_DEFINE_ERROR(Name, Base)          \
    class Name : public Base {                   \
    public:                                      \
        using Base::Base;                        \
    }

// Shared across modules.
KAGENT_DEFINE_ERROR(ConfigError, Error);
KAGENT_DEFINE_ERROR(IoError, Error);

} // namespace kagent
