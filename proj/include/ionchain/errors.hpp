#ifndef IONCHAIN_ERRORS_HPP
#define IONCHAIN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ionchain {

// Invalid physical input or a request outside a model's domain of validity.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& msg) : std::domain_error(msg) {}
};

// A solver or fit failed to converge or produced a non-finite result.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Nonlinear least-squares failure; carries the index of the offending peak
// when one can be identified (-1 otherwise).
class FitError : public NumericalError {
public:
    FitError(const std::string& msg, int peak_index = -1)
        : NumericalError(msg), peak_index_(peak_index) {}
    int peak_index() const { return peak_index_; }

private:
    int peak_index_;
};

// Frame registration failure; carries the indices of the two frames involved.
class StitchError : public NumericalError {
public:
    StitchError(const std::string& msg, int frame_a = -1, int frame_b = -1)
        : NumericalError(msg), frame_a_(frame_a), frame_b_(frame_b) {}
    int frame_a() const { return frame_a_; }
    int frame_b() const { return frame_b_; }

private:
    int frame_a_;
    int frame_b_;
};

}  // namespace ionchain

#endif
