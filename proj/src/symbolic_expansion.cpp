#include <cstdint>
#include <map>
#include <stdexcept>

#include "ngmpc/moment_dynamics.hpp"

namespace ngmpc {
namespace {

// Symbols of one-step substitution. Each exponent is packed in 4 bits.
enum Symbol : int {
    kSymX = 0,
    kSymY,
    kSymZ,
    kSymC,
    kSymS,
    kSymSpeed,     // ds * u_v
    kSymClimb,     // ds * u_z
    kSymCosTurn,   // cos(ds * u_psi)
    kSymSinTurn,   // sin(ds * u_psi)
    kSymSpeedW,    // ds * w_v
    kSymClimbW,    // ds * w_z
    kSymCosW,      // cos(ds * w_psi)
    kSymSinW,      // sin(ds * w_psi)
    kSymbolCount
};

using Packed = std::uint64_t;
using Polynomial = std::map<Packed, double>;

int exponent(Packed key, int symbol) { return static_cast<int>((key >> (4 * symbol)) & 0xF); }

Packed monomial(std::initializer_list<int> symbols) {
    Packed key = 0;
    for (int s : symbols) key += Packed{1} << (4 * s);
    return key;
}

Polynomial multiply(const Polynomial& a, const Polynomial& b) {
    Polynomial out;
    for (const auto& [ka, ca] : a) {
        for (const auto& [kb, cb] : b) {
            // Exponents stay below 16 for degree <= 4 products, so packed addition cannot carry.
            out[ka + kb] += ca * cb;
        }
    }
    for (auto it = out.begin(); it != out.end();) {
        it = (it->second == 0.0) ? out.erase(it) : std::next(it);
    }
    return out;
}

// Next-step value of each state symbol in terms of current state, control
// atoms and disturbance atoms.
std::array<Polynomial, 5> one_step_substitution() {
    std::array<Polynomial, 5> next;
    next[kX] = {{monomial({kSymX}), 1.0},
                {monomial({kSymC, kSymSpeed}), 1.0},
                {monomial({kSymC, kSymSpeedW}), 1.0}};
    next[kY] = {{monomial({kSymY}), 1.0},
                {monomial({kSymS, kSymSpeed}), 1.0},
                {monomial({kSymS, kSymSpeedW}), 1.0}};
    next[kZ] = {{monomial({kSymZ}), 1.0}, {monomial({kSymClimb}), 1.0}, {monomial({kSymClimbW}), 1.0}};
    // cos(psi + a + b) with a = ds u_psi, b = ds w_psi, angle-addition expanded twice.
    next[kCos] = {{monomial({kSymC, kSymCosTurn, kSymCosW}), 1.0},
                  {monomial({kSymC, kSymSinTurn, kSymSinW}), -1.0},
                  {monomial({kSymS, kSymSinTurn, kSymCosW}), -1.0},
                  {monomial({kSymS, kSymCosTurn, kSymSinW}), -1.0}};
    next[kSin] = {{monomial({kSymS, kSymCosTurn, kSymCosW}), 1.0},
                  {monomial({kSymS, kSymSinTurn, kSymSinW}), -1.0},
                  {monomial({kSymC, kSymSinTurn, kSymCosW}), 1.0},
                  {monomial({kSymC, kSymCosTurn, kSymSinW}), 1.0}};
    return next;
}

}  // namespace

std::size_t SymbolicExpansion::term_count() const {
    std::size_t n = 0;
    for (const auto& row : rows_) n += row.size();
    return n;
}

SymbolicExpansion build_expansion(int max_degree) {
    if (max_degree != kMaxMomentDegree) {
        throw std::invalid_argument("moment expansion is fixed at degree 4");
    }
    const MomentBasis& basis = MomentBasis::instance();
    const auto next = one_step_substitution();

    // powers[v][e] = next[v]^e
    std::array<std::array<Polynomial, kMaxMomentDegree + 1>, 5> powers;
    for (int v = 0; v < 5; ++v) {
        powers[v][0] = {{0, 1.0}};
        for (int e = 1; e <= kMaxMomentDegree; ++e) powers[v][e] = multiply(powers[v][e - 1], next[v]);
    }

    std::vector<std::vector<ExpansionTerm>> rows(basis.size());
    for (std::size_t target = 0; target < basis.size(); ++target) {
        const auto& exps = basis.monomial(target).exponents;
        Polynomial poly{{0, 1.0}};
        for (int v = 0; v < 5; ++v) {
            if (exps[v] > 0) poly = multiply(poly, powers[v][exps[v]]);
        }
        auto& row = rows[target];
        row.reserve(poly.size());
        for (const auto& [key, coef] : poly) {
            ExpansionTerm term;
            term.coefficient = coef;
            term.source = basis.index_of(exponent(key, kSymX), exponent(key, kSymY), exponent(key, kSymZ),
                                         exponent(key, kSymC), exponent(key, kSymS));
            term.control = {static_cast<std::uint8_t>(exponent(key, kSymSpeed)),
                            static_cast<std::uint8_t>(exponent(key, kSymClimb)),
                            static_cast<std::uint8_t>(exponent(key, kSymCosTurn)),
                            static_cast<std::uint8_t>(exponent(key, kSymSinTurn))};
            term.noise[static_cast<int>(NoiseChannel::speed_v)] = {exponent(key, kSymSpeedW), 0, 0};
            term.noise[static_cast<int>(NoiseChannel::altitude_z)] = {exponent(key, kSymClimbW), 0, 0};
            term.noise[static_cast<int>(NoiseChannel::heading_psi)] = {0, exponent(key, kSymCosW),
                                                                        exponent(key, kSymSinW)};
            row.push_back(term);
        }
    }
    return SymbolicExpansion(std::move(rows));
}

const SymbolicExpansion& default_expansion() {
    static const SymbolicExpansion expansion = build_expansion(kMaxMomentDegree);
    return expansion;
}

}  // namespace ngmpc
