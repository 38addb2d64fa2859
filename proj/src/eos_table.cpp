#include "chainflow/eos_table.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace chainflow {

EosTable::Entry eos_node_exact(double r, double e, const Potential& pot,
                               Lambda* lam_io) {
    const MacroState u{r, 0.0, e};
    const Lambda lam = (lam_io && lam_io->l3 > 0.0)
                           ? invert_to_lambda(u, pot, *lam_io)
                           : invert_to_lambda(u, pot);
    if (lam_io) *lam_io = lam;
    const SiteMoments m = site_moments(lam, pot);

    // Covariance of zeta and its inverse give dlambda/du.
    Mat3 h;
    h(0, 0) = m.var_r;
    h(0, 1) = h(1, 0) = 0.0;
    h(0, 2) = h(2, 0) = -m.cov_re;
    h(1, 1) = m.var_p;
    h(1, 2) = h(2, 1) = -m.cov_pe;
    h(2, 2) = m.var_e;
    // Columns of H^-1 via two SPD solves.
    const auto col0 = solve_spd3(h, {1.0, 0.0, 0.0});
    const auto col2 = solve_spd3(h, {0.0, 0.0, 1.0});

    EosTable::Entry out;
    out.tension = lam.l1 / lam.l3;
    out.beta = lam.l3;
    out.entr = m.theta - lambda_dot_u(lam, u);  // s = Theta - lambda.u = -Phi
    // P = l1/l3; u = (r, p, -E).  dP/du_k = Hinv[1][k]/l3 - (l1/l3^2) Hinv[3][k];
    // at p = 0 a change of e at fixed r is -du_3.
    const double inv11 = col0[0], inv31 = col0[2];
    const double inv13 = col2[0], inv33 = col2[2];
    out.p_r = inv11 / lam.l3 - (lam.l1 / (lam.l3 * lam.l3)) * inv31;
    out.p_e = -(inv13 / lam.l3 - (lam.l1 / (lam.l3 * lam.l3)) * inv33);
    out.c2 = out.p_r + out.tension * out.p_e;
    return out;
}

EosTable::EosTable(const Potential& pot, double r_lo, double r_hi, double w_lo,
                   double w_hi, double spacing)
    : pot_(pot), spacing_(spacing) {
    // The grid is uniform in y = log(e - V(r)).  1/beta is linear in
    // e - V(r) up to smooth corrections, so the log grid keeps the relative
    // interpolation error flat all the way down to cold states.
    w_lo = std::max(w_lo, 0.02);
    w_hi = std::max(w_hi, w_lo * 1.2);
    build(r_lo, r_hi, std::log(w_lo), std::log(w_hi));
}

bool EosTable::inside(double r, double y) const {
    // One cell of the padding ring must stay available for the 4x4 stencil.
    const double rmin = r0_ + spacing_, rmax = r0_ + (nr_ - 3) * spacing_;
    const double ymin = w0_ + spacing_, ymax = w0_ + (nw_ - 3) * spacing_;
    return r >= rmin && r <= rmax && y >= ymin && y <= ymax;
}

void EosTable::build(double r_lo, double r_hi, double y_lo, double y_hi) {
    r0_ = r_lo - 2.0 * spacing_;
    w0_ = y_lo - 2.0 * spacing_;
    nr_ = int(std::ceil((r_hi - r_lo) / spacing_)) + 5;
    nw_ = int(std::ceil((y_hi - y_lo) / spacing_)) + 5;
    if (std::size_t(nr_) * std::size_t(nw_) > 4'000'000)
        throw std::runtime_error("EosTable: requested domain too large");
    nodes_.assign(std::size_t(nr_) * nw_, Entry{});
    for (int j = 0; j < nw_; ++j) {
        Lambda warm{0.0, 0.0, -1.0};  // invalid: first node self-starts
        for (int i = 0; i < nr_; ++i) {
            const double r = r0_ + i * spacing_;
            const double e = std::exp(w0_ + j * spacing_) + pot_.eval(r);
            Entry entry = eos_node_exact(r, e, pot_, &warm);
            // beta ~ exp(-y) on this grid: interpolating log(beta) keeps the
            // relative error at the h^4 level of a nearly linear function.
            entry.beta = std::log(entry.beta);
            nodes_[std::size_t(j) * nr_ + i] = entry;
        }
    }
    ++rebuilds_;
}

namespace {

inline void catmull_rom_weights(double t, double w[4]) {
    w[0] = ((-0.5 * t + 1.0) * t - 0.5) * t;
    w[1] = (1.5 * t - 2.5) * t * t + 1.0;
    w[2] = ((-1.5 * t + 2.0) * t + 0.5) * t;
    w[3] = (0.5 * t - 0.5) * t * t;
}

}  // namespace

EosTable::Entry EosTable::eval(double r, double e) {
    const double w = e - pot_.eval(r);
    if (!(w > 1e-8))
        throw ThermoError(ThermoErrc::not_admissible,
                          "energy below the zero-temperature floor");
    const double y = std::log(w);
    if (!inside(r, y)) {
        // Grow around the union of the old box and the miss, with margin.
        const double margin = 20.0 * spacing_;
        const double rmin = std::min(r - margin, r0_ + 2.0 * spacing_);
        const double rmax = std::max(r + margin, r0_ + (nr_ - 3) * spacing_);
        const double ymin = std::min(y - margin, w0_ + 2.0 * spacing_);
        const double ymax = std::max(y + margin, w0_ + (nw_ - 3) * spacing_);
        build(rmin, rmax, ymin, ymax);
        if (!inside(r, y))
            throw ThermoError(ThermoErrc::not_admissible,
                              "state too close to the zero-temperature floor");
    }
    const double gx = (r - r0_) / spacing_;
    const double gy = (y - w0_) / spacing_;
    const int i0 = int(std::floor(gx));
    const int j0 = int(std::floor(gy));
    const double tx = gx - i0, ty = gy - j0;
    double wx[4], wy[4];
    catmull_rom_weights(tx, wx);
    catmull_rom_weights(ty, wy);

    Entry out{};
    for (int b = 0; b < 4; ++b) {
        const int j = j0 - 1 + b;
        Entry row{};
        for (int a = 0; a < 4; ++a) {
            const Entry& n = node(i0 - 1 + a, j);
            row.tension += wx[a] * n.tension;
            row.beta += wx[a] * n.beta;
            row.entr += wx[a] * n.entr;
            row.c2 += wx[a] * n.c2;
            row.p_r += wx[a] * n.p_r;
            row.p_e += wx[a] * n.p_e;
        }
        out.tension += wy[b] * row.tension;
        out.beta += wy[b] * row.beta;
        out.entr += wy[b] * row.entr;
        out.c2 += wy[b] * row.c2;
        out.p_r += wy[b] * row.p_r;
        out.p_e += wy[b] * row.p_e;
    }
    out.beta = std::exp(out.beta);
    return out;
}

}  // namespace chainflow
