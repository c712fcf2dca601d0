#pragma once

#include <stdexcept>
#include <string>

namespace judgeagg {

/// Raw model output could not be turned into a domain value.
class ParseError : public std::runtime_error {
public:
    enum class Kind { Malformed, OutOfRange, ExtraKeys, ScoreRange, NonIntegerScore };

    ParseError(Kind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// LLM endpoint failure that survived the retry policy.
class GatewayError : public std::runtime_error {
public:
    enum class Kind { Auth, Transport, ExhaustedRetries };

    GatewayError(Kind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// A required persona judgment or external label is absent from the record.
class MissingJudgments : public std::runtime_error {
public:
    explicit MissingJudgments(std::string message) : std::runtime_error(std::move(message)) {}
};

/// Input data cannot support the requested fit (constant target, etc.).
class DegenerateInput : public std::runtime_error {
public:
    explicit DegenerateInput(std::string message) : std::runtime_error(std::move(message)) {}
};

class InsufficientData : public std::runtime_error {
public:
    explicit InsufficientData(std::string message) : std::runtime_error(std::move(message)) {}
};

/// Training loss left the reals; typically a learning-rate blowup.
class NonFiniteLoss : public std::runtime_error {
public:
    explicit NonFiniteLoss(std::string message) : std::runtime_error(std::move(message)) {}
};

class IngestError : public std::runtime_error {
public:
    explicit IngestError(std::string message) : std::runtime_error(std::move(message)) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::string message) : std::runtime_error(std::move(message)) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(std::string message) : std::runtime_error(std::move(message)) {}
};

}  // namespace judgeagg
