#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace kern {

/// Error with a machine-parsable class token (`usage`, `io`, `format`,
/// `config`, `train`, `not-found`, ...). The CLI prints it as
/// `error[<cls>]: <message>` and exits nonzero.
class Error : public std::runtime_error {
public:
    Error(std::string cls, const std::string& message)
        : std::runtime_error(message), cls_(std::move(cls)) {}

    const std::string& cls() const noexcept { return cls_; }

private:
    std::string cls_;
};

} // namespace kern
