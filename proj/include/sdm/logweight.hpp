#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sdm {

// Natural log of a nonnegative quantity; -inf encodes exact zero. The binary
// circle intersection reaches ~2^n for n=1000, far past double range, so all
// of its arithmetic stays in this representation.
class LogWeight {
public:
    LogWeight() : log_(-std::numeric_limits<double>::infinity()) {}
    static LogWeight from_log(double lg) {
        LogWeight w;
        w.log_ = lg;
        return w;
    }
    static LogWeight zero() { return LogWeight(); }
    static LogWeight from_value(double v) {
        if (v < 0.0) throw std::domain_error("LogWeight: negative value");
        return from_log(v == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(v));
    }

    double log_value() const { return log_; }
    double value() const { return std::exp(log_); }
    bool is_zero() const { return std::isinf(log_) && log_ < 0; }

    // log-sum-exp accumulation
    LogWeight& operator+=(const LogWeight& o) {
        if (o.is_zero()) return *this;
        if (is_zero()) {
            log_ = o.log_;
            return *this;
        }
        if (log_ >= o.log_) {
            log_ += std::log1p(std::exp(o.log_ - log_));
        } else {
            log_ = o.log_ + std::log1p(std::exp(log_ - o.log_));
        }
        return *this;
    }
    friend LogWeight operator+(LogWeight a, const LogWeight& b) { return a += b; }

    LogWeight& operator*=(const LogWeight& o) {
        if (is_zero() || o.is_zero())
            log_ = -std::numeric_limits<double>::infinity();
        else
            log_ += o.log_;
        return *this;
    }
    friend LogWeight operator*(LogWeight a, const LogWeight& b) { return a *= b; }

private:
    double log_;
};

// Compensated (Kahan) accumulator for long weighted sums in linear space.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

}  // namespace sdm
