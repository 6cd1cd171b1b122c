#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bidhi {

/// Base of every error raised by the harness. Callers that only need to
/// report can catch this; callers that recover catch the specific type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& reason)
        : Error("config error at '" + field + "': " + reason), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// dataset

class MalformedRecord : public Error {
public:
    MalformedRecord(std::size_t line_no, std::string reason)
        : Error("line " + std::to_string(line_no) + ": " + reason),
          line_no_(line_no), reason_(std::move(reason)) {}

    std::size_t line_no() const noexcept { return line_no_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_no_;
    std::string reason_;
};

class DuplicateTaskId : public Error {
public:
    DuplicateTaskId(std::size_t line_no, std::string id)
        : Error("line " + std::to_string(line_no) + ": duplicate task_id '" + id + "'"),
          line_no_(line_no), id_(std::move(id)) {}

    std::size_t line_no() const noexcept { return line_no_; }
    const std::string& id() const noexcept { return id_; }

private:
    std::size_t line_no_;
    std::string id_;
};

// backends

class BackendError : public Error {
public:
    using Error::Error;
};

class BackendTimeout : public BackendError {
public:
    using BackendError::BackendError;
};

class BackendHttpError : public BackendError {
public:
    BackendHttpError(int status, const std::string& detail)
        : BackendError("backend HTTP error " + std::to_string(status) + ": " + detail),
          status_(status) {}

    /// 0 when the request never produced an HTTP status (connection failure).
    int status() const noexcept { return status_; }

private:
    int status_;
};

class ReplayMiss : public BackendError {
public:
    using BackendError::BackendError;
};

class MockRuleMiss : public BackendError {
public:
    using BackendError::BackendError;
};

// translate

class TranslatorError : public Error {
public:
    using Error::Error;
};

class TranslatorTimeout : public TranslatorError {
public:
    using TranslatorError::TranslatorError;
};

class TranslatorHttpError : public TranslatorError {
public:
    TranslatorHttpError(int status, const std::string& detail)
        : TranslatorError("translator HTTP error " + std::to_string(status) + ": " + detail),
          status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

class StubMiss : public TranslatorError {
public:
    using TranslatorError::TranslatorError;
};

// prompting / tddgen

class MissingBinding : public Error {
public:
    explicit MissingBinding(std::string name)
        : Error("missing binding for placeholder {" + name + "}"), name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

class InvalidTemplate : public Error {
public:
    using Error::Error;
};

class EmptyResponse : public Error {
public:
    EmptyResponse() : Error("empty model response") {}
};

class NonAssertEntry : public Error {
public:
    explicit NonAssertEntry(std::size_t index)
        : Error("test entry " + std::to_string(index) + " is not an assert statement"),
          index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// sandbox

class SandboxUnavailable : public Error {
public:
    using Error::Error;
};

// metrics

class EmptyCell : public Error {
public:
    using Error::Error;
};

class ZeroDenominator : public Error {
public:
    using Error::Error;
};

} // namespace bidhi
