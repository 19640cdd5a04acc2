#ifndef CATBN_ERROR_HPP
#define CATBN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace catbn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// P(e) = 0 under the model. Distinct from "uniform ignorance" on purpose.
class ImpossibleEvidence : public Error {
public:
    using Error::Error;
};

class UnknownVariable : public Error {
public:
    explicit UnknownVariable(const std::string& id)
        : Error("unknown variable '" + id + "'"), id_(id) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace catbn

#endif
