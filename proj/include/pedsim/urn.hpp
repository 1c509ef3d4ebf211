#pragma once
// Urn-based activation: a desired/maximum speed ratio realised as extraction without
// replacement from `alpha` move events among `beta` total events.

#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include <fmt/format.h>

namespace pedsim {

struct Fraction {
    int num = 1;
    int den = 1;
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// Minimal pair (i, j) with i/j == rho. Ratios that are not short decimals fall back to the
/// best rational approximation with denominator <= max_denominator.
inline Fraction frac(double rho, int max_denominator = 1000) {
    if (!(rho > 0.0)) throw std::domain_error(fmt::format("activation ratio {} must be positive", rho));
    if (rho > 1.0 + 1e-12) throw std::domain_error(fmt::format("activation ratio {} exceeds 1 (desired speed above maximum)", rho));
    if (rho >= 1.0) return {1, 1};

    long long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double x = rho;
    for (int iter = 0; iter < 64; ++iter) {
        const double a = std::floor(x);
        const auto ai = static_cast<long long>(a);
        const long long p2 = ai * p1 + p0, q2 = ai * q1 + q0;
        if (q2 > max_denominator) {
            // Best semiconvergent that still fits.
            const long long k = (max_denominator - q0) / q1;
            const long long ps = p0 + k * p1, qs = q0 + k * q1;
            if (k > 0 && std::abs(static_cast<double>(ps) / qs - rho) < std::abs(static_cast<double>(p1) / q1 - rho)) {
                p1 = ps;
                q1 = qs;
            }
            break;
        }
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        if (std::abs(static_cast<double>(p1) / static_cast<double>(q1) - rho) <= 1e-9) break;
        const double rest = x - a;
        if (rest < 1e-15) break;
        x = 1.0 / rest;
    }
    const auto g = std::gcd(p1, q1);
    return {static_cast<int>(p1 / g), static_cast<int>(q1 / g)};
}

/// Excess length of a diagonal step relative to an orthogonal one: (0.4*sqrt2 - 0.4)/0.4.
inline const double kDiagonalPenalty = (0.4 * std::sqrt(2.0) - 0.4) / 0.4;

/// Splits (alpha, beta) into gcd(alpha, beta) identical sub-urns; a single urn when the pair is already minimal.
inline std::vector<std::pair<int, int>> split_urn(int alpha, int beta) {
    if (beta < 1 || alpha < 0 || alpha > beta) throw std::invalid_argument("urn must satisfy 0 <= alpha <= beta, beta >= 1");
    const int g = std::gcd(alpha, beta);
    return std::vector<std::pair<int, int>>(static_cast<std::size_t>(g), {alpha / g, beta / g});
}

/// Adds the diagonal excess to `penalty` and returns how many extra do-not-move events are due (each pays back 1).
/// `steps_per_move` (1/rho) expresses the excess in the agent's own steps, so a diagonal costs sqrt(2) straight moves
/// at any speed.
inline int apply_diag_penalty(double& penalty, double steps_per_move = 1.0) noexcept {
    penalty += kDiagonalPenalty * steps_per_move;
    int owed = 0;
    while (penalty >= 1.0) {
        penalty -= 1.0;
        ++owed;
    }
    return owed;
}

enum class Activation : std::uint8_t { Skipped, Succeeded, Failed };

class UrnState {
public:
    UrnState() = default;
    explicit UrnState(Fraction rho) : alpha_(rho.num), beta_(rho.den), rho_(rho) {}

    int alpha() const noexcept { return alpha_; }
    int beta() const noexcept { return beta_; }
    Fraction rho() const noexcept { return rho_; }
    const std::deque<std::pair<int, int>>& pending() const noexcept { return pending_; }

    /// The refill target; the in-flight urn (and its sub-urns) drain first.
    void set_rho(Fraction rho) noexcept { rho_ = rho; }
    /// Discards the running urn and pending sub-urns and starts a fresh cycle at `rho`.
    void restart(Fraction rho) {
        *this = UrnState(rho);
    }

    /// Move iff u <= alpha/beta (never with an empty move budget).
    bool wants_move(double u) const noexcept {
        return alpha_ > 0 && u <= static_cast<double>(alpha_) / static_cast<double>(beta_);
    }

    /// Post-step bookkeeping: consume the extracted event (a failed attempt returns it), add
    /// `extra_stay_events` do-not-move events, refill on empty, then split into sub-urns when reducible.
    void settle(Activation outcome, int extra_stay_events = 0) {
        if (outcome == Activation::Succeeded) --alpha_;
        else if (outcome == Activation::Failed) ++beta_;
        --beta_;
        beta_ += extra_stay_events;
        if (beta_ == 0) refill();
        if (alpha_ > 0 && alpha_ < beta_ && std::gcd(alpha_, beta_) > 1) {
            auto parts = split_urn(alpha_, beta_);
            alpha_ = parts.front().first;
            beta_ = parts.front().second;
            for (std::size_t i = 1; i < parts.size(); ++i) pending_.push_front(parts[i]);
        }
    }

    friend bool operator==(const UrnState&, const UrnState&) = default;

private:
    void refill() {
        if (!pending_.empty()) {
            std::tie(alpha_, beta_) = pending_.front();
            pending_.pop_front();
        } else {
            alpha_ = rho_.num;
            beta_ = rho_.den;
        }
    }

    int alpha_ = 1;
    int beta_ = 1;
    Fraction rho_{};
    std::deque<std::pair<int, int>> pending_;
};

}  // namespace pedsim
