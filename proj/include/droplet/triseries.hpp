#pragma once

// Finitely supported power series in three variables (x1, x2, x3), truncated
// by total degree. The variables stand for x, b x^beta and mu x^gamma, so a
// monomial x1^k x2^l x3^m behaves like x^(k + beta l + gamma m) along the
// curve; that exponent is the grade of the monomial and the eigenvalue of the
// graded Euler operator on it.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "droplet/error.hpp"
#include "droplet/format.hpp"
#include "droplet/params.hpp"

namespace droplet {

struct multi_index {
    int k = 0; // power of x1
    int l = 0; // power of x2
    int m = 0; // power of x3

    constexpr int degree() const noexcept { return k + l + m; }

    friend constexpr auto operator<=>(const multi_index&, const multi_index&) = default;
    friend constexpr multi_index operator+(multi_index a, multi_index b) noexcept
    {
        return {a.k + b.k, a.l + b.l, a.m + b.m};
    }
};

constexpr double grade(multi_index idx, grading g) noexcept
{
    return idx.k + g.beta * idx.l + g.gamma * idx.m;
}

inline std::string to_string(multi_index idx)
{
    return "(" + std::to_string(idx.k) + "," + std::to_string(idx.l) + "," + std::to_string(idx.m) + ")";
}

struct term {
    multi_index index;
    double coeff;
};

class tri_series {
public:
    explicit tri_series(int degree_cutoff) : cutoff_(degree_cutoff)
    {
        if (degree_cutoff < 0) {
            throw error(error_kind::usage, "degree cutoff must be nonnegative");
        }
    }

    static tri_series constant(double c, int degree_cutoff)
    {
        tri_series s(degree_cutoff);
        s.set({0, 0, 0}, c);
        return s;
    }

    static tri_series monomial(multi_index idx, double c, int degree_cutoff)
    {
        tri_series s(degree_cutoff);
        s.set(idx, c);
        return s;
    }

    int cutoff() const noexcept { return cutoff_; }
    std::span<const term> terms() const noexcept { return terms_; }
    std::size_t size() const noexcept { return terms_.size(); }
    bool empty() const noexcept { return terms_.empty(); }

    double coeff(multi_index idx) const noexcept
    {
        auto it = find(idx);
        return (it != terms_.end() && it->index == idx) ? it->coeff : 0.0;
    }

    // Indices beyond the cutoff are silently truncated; zeros are never stored.
    void set(multi_index idx, double c)
    {
        if (idx.k < 0 || idx.l < 0 || idx.m < 0) {
            throw error(error_kind::usage, "negative exponent in " + to_string(idx));
        }
        if (idx.degree() > cutoff_) {
            return;
        }
        auto it = find(idx);
        const bool present = it != terms_.end() && it->index == idx;
        if (c == 0.0) {
            if (present) {
                terms_.erase(it);
            }
        } else if (present) {
            it->coeff = c;
        } else {
            terms_.insert(it, term{idx, c});
        }
    }

    // Multiplies every coefficient by f(index). Entries that become zero are dropped.
    template <class F>
    tri_series map_coefficients(F&& f) const
    {
        tri_series out(cutoff_);
        out.terms_.reserve(terms_.size());
        for (const auto& t : terms_) {
            const double c = t.coeff * f(t.index);
            if (c != 0.0) {
                out.terms_.push_back({t.index, c});
            }
        }
        return out;
    }

    // Restriction to terms of total degree exactly d.
    tri_series shell(int d) const
    {
        tri_series out(cutoff_);
        for (const auto& t : terms_) {
            if (t.index.degree() == d) {
                out.terms_.push_back(t);
            }
        }
        return out;
    }

    double max_abs_coeff() const noexcept
    {
        double r = 0.0;
        for (const auto& t : terms_) {
            r = std::max(r, std::abs(t.coeff));
        }
        return r;
    }

    friend tri_series operator+(const tri_series& a, const tri_series& b) { return combine(a, b, 1.0); }
    friend tri_series operator-(const tri_series& a, const tri_series& b) { return combine(a, b, -1.0); }
    friend tri_series operator*(double s, const tri_series& a)
    {
        return a.map_coefficients([s](multi_index) { return s; });
    }
    friend tri_series operator*(const tri_series& a, const tri_series& b) { return multiply(a, b); }

    friend bool operator==(const tri_series& a, const tri_series& b)
    {
        if (a.cutoff_ != b.cutoff_ || a.terms_.size() != b.terms_.size()) {
            return false;
        }
        for (std::size_t i = 0; i < a.terms_.size(); ++i) {
            if (a.terms_[i].index != b.terms_[i].index || a.terms_[i].coeff != b.terms_[i].coeff) {
                return false;
            }
        }
        return true;
    }

    // Truncated Cauchy product, accumulated in a dense simplex buffer.
    static tri_series multiply(const tri_series& a, const tri_series& b)
    {
        require_same_cutoff(a, b);
        const int c = a.cutoff_;
        const std::size_t side = static_cast<std::size_t>(c) + 1;
        std::vector<double> acc(side * side * side, 0.0);
        std::vector<unsigned char> touched(acc.size(), 0);
        for (const auto& ta : a.terms_) {
            const int room = c - ta.index.degree();
            for (const auto& tb : b.terms_) {
                if (tb.index.degree() > room) {
                    continue;
                }
                const multi_index s = ta.index + tb.index;
                const std::size_t at = (static_cast<std::size_t>(s.k) * side + s.l) * side + s.m;
                acc[at] += ta.coeff * tb.coeff;
                touched[at] = 1;
            }
        }
        tri_series out(c);
        for (int k = 0; k <= c; ++k) {
            for (int l = 0; l + k <= c; ++l) {
                for (int m = 0; m + l + k <= c; ++m) {
                    const std::size_t at = (static_cast<std::size_t>(k) * side + l) * side + m;
                    if (touched[at] && acc[at] != 0.0) {
                        out.terms_.push_back({{k, l, m}, acc[at]});
                    }
                }
            }
        }
        return out;
    }

private:
    static void require_same_cutoff(const tri_series& a, const tri_series& b)
    {
        if (a.cutoff_ != b.cutoff_) {
            throw error(error_kind::usage, "series cutoff mismatch: " + std::to_string(a.cutoff_)
                                               + " vs " + std::to_string(b.cutoff_));
        }
    }

    static tri_series combine(const tri_series& a, const tri_series& b, double sign)
    {
        require_same_cutoff(a, b);
        tri_series out(a.cutoff_);
        out.terms_.reserve(a.terms_.size() + b.terms_.size());
        auto ia = a.terms_.begin();
        auto ib = b.terms_.begin();
        while (ia != a.terms_.end() || ib != b.terms_.end()) {
            if (ib == b.terms_.end() || (ia != a.terms_.end() && ia->index < ib->index)) {
                out.terms_.push_back(*ia++);
            } else if (ia == a.terms_.end() || ib->index < ia->index) {
                out.terms_.push_back({ib->index, sign * ib->coeff});
                ++ib;
            } else {
                const double c = ia->coeff + sign * ib->coeff;
                if (c != 0.0) {
                    out.terms_.push_back({ia->index, c});
                }
                ++ia;
                ++ib;
            }
        }
        return out;
    }

    std::vector<term>::iterator find(multi_index idx)
    {
        return std::lower_bound(terms_.begin(), terms_.end(), idx,
                                [](const term& t, const multi_index& i) { return t.index < i; });
    }
    std::vector<term>::const_iterator find(multi_index idx) const
    {
        return std::lower_bound(terms_.begin(), terms_.end(), idx,
                                [](const term& t, const multi_index& i) { return t.index < i; });
    }

    int cutoff_;
    std::vector<term> terms_; // sorted by (k, l, m)
};

inline tri_series ts_add(const tri_series& a, const tri_series& b) { return a + b; }
inline tri_series ts_mul(const tri_series& a, const tri_series& b) { return a * b; }

// (1 + u)^s as the truncated binomial series, evaluated in Horner form.
inline tri_series ts_pow_real(const tri_series& a, double s)
{
    if (a.coeff({0, 0, 0}) != 1.0) {
        throw error(error_kind::domain, "fractional power needs constant term exactly 1");
    }
    const int c = a.cutoff();
    const tri_series u = a - tri_series::constant(1.0, c);
    tri_series result = tri_series::constant(1.0, c);
    for (int j = c; j >= 1; --j) {
        const double ratio = (s - j + 1.0) / j;
        result = ratio * (u * result) + tri_series::constant(1.0, c);
    }
    return result;
}

// (Dbar + shift) acting diagonally: coefficient times (grade + shift).
inline tri_series apply_dbar(const tri_series& a, grading g, double shift)
{
    return a.map_coefficients([&](multi_index idx) { return grade(idx, g) + shift; });
}

inline tri_series apply_q_dbar(const params& p, const tri_series& a)
{
    const grading g = p.grades();
    return a.map_coefficients([&](multi_index idx) { return eval_q(p, grade(idx, g)); });
}

inline tri_series apply_p_dbar(const params& p, const tri_series& a)
{
    const grading g = p.grades();
    return a.map_coefficients([&](multi_index idx) { return eval_p(p, grade(idx, g)); });
}

inline constexpr double default_resonance_tol = 1e-9;

// Solves p(Dbar) u = f with (u, d2 u)(0,0,0) = (0,0) by diagonal division.
// On a monomial of grade s the composed radial integrals reduce to 1 / p(s).
inline tri_series invert_p(const params& p, const tri_series& f,
                           double resonance_tol = default_resonance_tol)
{
    for (multi_index forbidden : {multi_index{0, 0, 0}, multi_index{0, 1, 0}}) {
        if (f.coeff(forbidden) != 0.0) {
            throw error(error_kind::precondition,
                        "right-hand side must vanish at " + to_string(forbidden));
        }
    }
    const grading g = p.grades();
    for (const auto& t : f.terms()) {
        const double d = eval_p(p, grade(t.index, g));
        if (!(std::abs(d) >= resonance_tol)) {
            throw error(error_kind::resonance, "p(grade) vanishes at index " + to_string(t.index));
        }
    }
    return f.map_coefficients([&](multi_index idx) { return 1.0 / eval_p(p, grade(idx, g)); });
}

// Sum of coeff * b^l * mu^m * x^grade, i.e. the series along x2 = b x^beta, x3 = mu x^gamma.
inline double eval_along_curve(const tri_series& a, grading g, double x, double b, double mu)
{
    double sum = 0.0;
    for (const auto& t : a.terms()) {
        sum += t.coeff * std::pow(b, t.index.l) * std::pow(mu, t.index.m) * std::pow(x, grade(t.index, g));
    }
    return sum;
}

// Debug dump: "k l m coefficient", one term per line, lexicographic.
inline void write_terms(std::ostream& os, const tri_series& a)
{
    for (const auto& t : a.terms()) {
        os << t.index.k << ' ' << t.index.l << ' ' << t.index.m << ' ' << format_double(t.coeff) << '\n';
    }
}

} // namespace droplet
