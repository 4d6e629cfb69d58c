#pragma once

#include <stdexcept>
#include <string>

namespace docqa {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class UnreadableFile : public Error {
public:
    using Error::Error;
};

/// Layout input is structurally broken (missing page numbers, bboxes, ...).
class MalformedLayout : public Error {
public:
    using Error::Error;
};

class EmptyKeywords : public Error {
public:
    using Error::Error;
};

/// None of the requested section ids resolve against the outline.
class UnknownSectionId : public Error {
public:
    using Error::Error;
};

class PolicyUnavailable : public Error {
public:
    using Error::Error;
};

class SummarizerUnavailable : public Error {
public:
    using Error::Error;
};

class AuthFailure : public Error {
public:
    using Error::Error;
};

class ContextOverflow : public Error {
public:
    using Error::Error;
};

/// An ordered scripted scenario ran out of canned responses.
class ScenarioExhausted : public Error {
public:
    using Error::Error;
};

/// A keyed scripted scenario saw an input hash it has no response for.
class KeyMiss : public Error {
public:
    using Error::Error;
};

/// Synthesizer output could not be parsed as a question/answer object
/// even after the single resubmission.
class UnparseableOutput : public Error {
public:
    using Error::Error;
};

/// Loss mask selects no tokens, the masked mean is undefined.
class EmptyKeptSet : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IOFailure : public Error {
public:
    using Error::Error;
};

}  // namespace docqa
