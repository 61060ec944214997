#pragma once

// Monomial basis over the augmented state (x, y, z, cos psi, sin psi) up to
// total degree 4, in graded lexicographic order with x > y > z > c > s.
// Index 0 is the constant monomial.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ngmpc {

inline constexpr int kMaxMomentDegree = 4;
inline constexpr std::size_t kBasisSize = 126;
inline constexpr std::size_t kConstantIndex = 0;

enum StateVariable : int { kX = 0, kY = 1, kZ = 2, kCos = 3, kSin = 4 };

struct MonomialIndex {
    std::array<std::uint8_t, 5> exponents{};

    int degree() const;
    // e.g. "x^2*c" ; "1" for the constant.
    std::string label() const;
    bool operator==(const MonomialIndex&) const = default;
};

class MomentBasis {
public:
    static const MomentBasis& instance();

    std::size_t size() const { return monomials_.size(); }
    const MonomialIndex& monomial(std::size_t i) const { return monomials_.at(i); }
    const std::vector<MonomialIndex>& monomials() const { return monomials_; }

    // Throws std::out_of_range for degree > 4.
    std::size_t index_of(const MonomialIndex& m) const;
    std::size_t index_of(int ex, int ey, int ez, int ec, int es) const;

    // [begin, end) of the block of degree d.
    std::size_t degree_begin(int d) const { return degree_offsets_.at(d); }
    std::size_t degree_end(int d) const { return degree_offsets_.at(d + 1); }

private:
    MomentBasis();

    std::vector<MonomialIndex> monomials_;
    std::array<std::size_t, kMaxMomentDegree + 2> degree_offsets_{};
    std::vector<int> lookup_;  // base-5 encoded exponents -> index, -1 when absent
};

// Expectations of every basis monomial at one time step.
struct MomentVector {
    std::array<double, kBasisSize> values{};
    int time_step = 0;

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    double at(int ex, int ey, int ez, int ec, int es) const {
        return values[MomentBasis::instance().index_of(ex, ey, ez, ec, es)];
    }

    double mean_x() const { return values[1]; }
    double mean_y() const { return values[2]; }
    double mean_z() const { return values[3]; }
};

}  // namespace ngmpc
