#include "ngmpc/moment_basis.hpp"

#include <stdexcept>

namespace ngmpc {
namespace {

constexpr char kVariableNames[5] = {'x', 'y', 'z', 'c', 's'};

int encode(int ex, int ey, int ez, int ec, int es) {
    return (((ex * 5 + ey) * 5 + ez) * 5 + ec) * 5 + es;
}

}  // namespace

int MonomialIndex::degree() const {
    int d = 0;
    for (auto e : exponents) d += e;
    return d;
}

std::string MonomialIndex::label() const {
    std::string out;
    for (int v = 0; v < 5; ++v) {
        if (exponents[v] == 0) continue;
        if (!out.empty()) out += '*';
        out += kVariableNames[v];
        if (exponents[v] > 1) out += "^" + std::to_string(exponents[v]);
    }
    return out.empty() ? "1" : out;
}

MomentBasis::MomentBasis() : lookup_(5 * 5 * 5 * 5 * 5, -1) {
    for (int d = 0; d <= kMaxMomentDegree; ++d) {
        degree_offsets_[d] = monomials_.size();
        // Descending lexicographic enumeration within the degree block.
        for (int ex = d; ex >= 0; --ex) {
            for (int ey = d - ex; ey >= 0; --ey) {
                for (int ez = d - ex - ey; ez >= 0; --ez) {
                    for (int ec = d - ex - ey - ez; ec >= 0; --ec) {
                        const int es = d - ex - ey - ez - ec;
                        MonomialIndex m;
                        m.exponents = {static_cast<std::uint8_t>(ex), static_cast<std::uint8_t>(ey),
                                       static_cast<std::uint8_t>(ez), static_cast<std::uint8_t>(ec),
                                       static_cast<std::uint8_t>(es)};
                        lookup_[encode(ex, ey, ez, ec, es)] = static_cast<int>(monomials_.size());
                        monomials_.push_back(m);
                    }
                }
            }
        }
    }
    degree_offsets_[kMaxMomentDegree + 1] = monomials_.size();
    if (monomials_.size() != kBasisSize) throw std::logic_error("moment basis size mismatch");
}

const MomentBasis& MomentBasis::instance() {
    static const MomentBasis basis;
    return basis;
}

std::size_t MomentBasis::index_of(int ex, int ey, int ez, int ec, int es) const {
    if (ex < 0 || ey < 0 || ez < 0 || ec < 0 || es < 0 || ex + ey + ez + ec + es > kMaxMomentDegree) {
        throw std::out_of_range("monomial outside the degree-4 basis");
    }
    return static_cast<std::size_t>(lookup_[encode(ex, ey, ez, ec, es)]);
}

std::size_t MomentBasis::index_of(const MonomialIndex& m) const {
    const auto& e = m.exponents;
    return index_of(e[0], e[1], e[2], e[3], e[4]);
}

}  // namespace ngmpc
