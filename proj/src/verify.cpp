#include "verdoc/verify.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "verdoc/error.hpp"
#include "verdoc/util.hpp"

namespace verdoc {

std::string_view method_name(BoundMethod m) { return m == BoundMethod::Naive ? "naive" : "symbolic"; }

BoundMethod method_from_name(std::string_view name) {
    if (name == "naive") return BoundMethod::Naive;
    if (name == "symbolic") return BoundMethod::Symbolic;
    throw ConfigError("unknown bound method '" + std::string(name) + "'");
}

Box Box::from_region(const IntervalRegion& region) {
    return {to_eigen(region.lower), to_eigen(region.upper)};
}

namespace {

// Row-wise minimum/maximum of A * v over vlo <= v <= vhi.
Eigen::VectorXd row_min(const Eigen::MatrixXd& A, const Eigen::VectorXd& vlo, const Eigen::VectorXd& vhi) {
    return A.cwiseMax(0.0) * vlo + A.cwiseMin(0.0) * vhi;
}

Eigen::VectorXd row_max(const Eigen::MatrixXd& A, const Eigen::VectorXd& vlo, const Eigen::VectorXd& vhi) {
    return A.cwiseMax(0.0) * vhi + A.cwiseMin(0.0) * vlo;
}

// d(row_min)/dA given upstream g: g_j * (A_ji > 0 ? vlo_i : vhi_i).
Eigen::MatrixXd row_min_grad(const Eigen::MatrixXd& A, const Eigen::VectorXd& g, const Eigen::VectorXd& vlo,
                             const Eigen::VectorXd& vhi) {
    Eigen::MatrixXd out(A.rows(), A.cols());
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
        for (Eigen::Index r = 0; r < A.rows(); ++r) out(r, c) = g(r) * (A(r, c) > 0 ? vlo(c) : vhi(c));
    }
    return out;
}

Eigen::MatrixXd row_max_grad(const Eigen::MatrixXd& A, const Eigen::VectorXd& g, const Eigen::VectorXd& vlo,
                             const Eigen::VectorXd& vhi) {
    return row_min_grad(A, g, vhi, vlo);
}

Eigen::MatrixXd select_sign(const Eigen::MatrixXd& W, const Eigen::MatrixXd& pos, const Eigen::MatrixXd& neg) {
    return (W.array() > 0.0).select(pos, neg);
}

}  // namespace

WorstCaseBound::WorstCaseBound(const MlpModel& model, const Box& box, int true_class, Options options)
    : model_(&model), true_class_(true_class), symbolic_(options.method == BoundMethod::Symbolic) {
    const auto dim = static_cast<Eigen::Index>(model.input_dim());
    if (box.lo.size() != dim || box.hi.size() != dim) {
        throw DimensionMismatch("region has " + std::to_string(box.lo.size()) + " features, model expects " +
                                std::to_string(dim));
    }
    if (true_class != kBenign && true_class != kMalicious) throw DimensionMismatch("true class must be 0 or 1");
    lo_ = box.lo;
    hi_ = box.hi;
    x0_ = lo_;
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (lo_(i) > hi_(i)) throw DimensionMismatch("box lower bound exceeds upper bound");
        if (lo_(i) < hi_(i)) {
            free_.push_back(i);
            x0_(i) = 0.0;
        }
    }
    const auto f = static_cast<Eigen::Index>(free_.size());
    vlo_.resize(f);
    vhi_.resize(f);
    for (Eigen::Index j = 0; j < f; ++j) {
        vlo_(j) = lo_(free_[j]);
        vhi_(j) = hi_(free_[j]);
    }

    const auto& layers = model.layers();
    layers_.resize(layers.size());
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& W = layers[k].W;
        const auto& b = layers[k].b;
        Eigen::MatrixXd Wp = W.cwiseMax(0.0);
        Eigen::MatrixXd Wn = W.cwiseMin(0.0);
        Layer& L = layers_[k];
        Eigen::VectorXd nl, nu;
        if (k == 0) {
            nl = Wp * lo_ + Wn * hi_ + b;
            nu = Wp * hi_ + Wn * lo_ + b;
            if (symbolic_) {
                L.AL.resize(W.rows(), f);
                for (Eigen::Index j = 0; j < f; ++j) L.AL.col(j) = W.col(free_[j]);
                L.AU = L.AL;
                L.cL = W * x0_ + b;
                L.cU = L.cL;
            }
        } else {
            const Layer& P = layers_[k - 1];
            nl = Wp * P.pl + Wn * P.pu + b;
            nu = Wp * P.pu + Wn * P.pl + b;
            if (symbolic_) {
                L.AL = Wp * P.pAL + Wn * P.pAU;
                L.AU = Wp * P.pAU + Wn * P.pAL;
                L.cL = Wp * P.pcL + Wn * P.pcU + b;
                L.cU = Wp * P.pcU + Wn * P.pcL + b;
            }
        }
        const auto n = W.rows();
        L.pick_sym_l.assign(static_cast<std::size_t>(n), 0);
        L.pick_sym_u.assign(static_cast<std::size_t>(n), 0);
        if (symbolic_) {
            Eigen::VectorXd ls = L.cL + row_min(L.AL, vlo_, vhi_);
            Eigen::VectorXd us = L.cU + row_max(L.AU, vlo_, vhi_);
            L.l = nl;
            L.u = nu;
            L.gap = ((ls - nl).cwiseAbs()).cwiseMin((us - nu).cwiseAbs());
            for (Eigen::Index j = 0; j < n; ++j) {
                if (ls(j) >= nl(j)) {
                    L.l(j) = ls(j);
                    L.pick_sym_l[static_cast<std::size_t>(j)] = 1;
                }
                if (us(j) <= nu(j)) {
                    L.u(j) = us(j);
                    L.pick_sym_u[static_cast<std::size_t>(j)] = 1;
                }
            }
        } else {
            L.l = nl;
            L.u = nu;
        }
        if (k + 1 == layers.size()) break;

        // ReLU relaxation
        L.phase.assign(static_cast<std::size_t>(n), 0);
        L.scale = Eigen::VectorXd::Zero(n);
        L.pl = Eigen::VectorXd::Zero(n);
        L.pu = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd slope = Eigen::VectorXd::Zero(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            auto js = static_cast<std::size_t>(j);
            if (L.l(j) >= 0) {
                L.phase[js] = 1;
                L.scale(j) = 1.0;
                L.pl(j) = L.l(j);
                L.pu(j) = L.u(j);
            } else if (L.u(j) <= 0) {
                L.phase[js] = 0;
            } else {
                L.phase[js] = 2;
                double lam = L.u(j) / (L.u(j) - L.l(j));
                if (options.frozen_slopes && k < options.frozen_slopes->size() &&
                    (*options.frozen_slopes)[k].size() == n && (*options.frozen_slopes)[k](j) > 0) {
                    lam = (*options.frozen_slopes)[k](j);
                }
                slope(j) = lam;
                L.scale(j) = lam;
                L.pu(j) = L.u(j);
            }
        }
        slopes_.push_back(slope);
        if (symbolic_) {
            L.pAL = L.scale.asDiagonal() * L.AL;
            L.pAU = L.scale.asDiagonal() * L.AU;
            L.pcL = L.scale.cwiseProduct(L.cL);
            L.pcU = L.scale.cwiseProduct(L.cU);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (L.phase[static_cast<std::size_t>(j)] == 2) L.pcU(j) = L.scale(j) * (L.cU(j) - L.l(j));
            }
        }
    }
    const Layer& out = layers_.back();
    int other = 1 - true_class_;
    logits_(true_class_) = out.l(true_class_);
    logits_(other) = out.u(other);
}

OutputBounds WorstCaseBound::bounds() const {
    const Layer& out = layers_.back();
    return {out.l, out.u, symbolic_ ? BoundMethod::Symbolic : BoundMethod::Naive};
}

bool WorstCaseBound::near_boundary(double tol) const {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const Layer& L = layers_[k];
        if (k == 0 && symbolic_) continue;  // both tracks are exact intervals here
        if (symbolic_ && L.gap.size() && L.gap.minCoeff() < tol) return true;
        if (k + 1 == layers_.size()) break;
        for (Eigen::Index j = 0; j < L.l.size(); ++j) {
            if (std::abs(L.l(j)) < tol || std::abs(L.u(j)) < tol) return true;
        }
    }
    return false;
}

double WorstCaseBound::loss() const { return loss_ce_logits(logits_, true_class_); }

Gradients WorstCaseBound::loss_gradients() const {
    Eigen::Vector2d d = softmax(logits_);
    d(true_class_) -= 1.0;
    return backward(d);
}

Gradients WorstCaseBound::backward(const Eigen::Vector2d& dlogits) const {
    const auto& layers = model_->layers();
    Gradients g = Gradients::zeros_like(*model_);
    const std::size_t K = layers.size();
    const auto f = static_cast<Eigen::Index>(free_.size());

    Eigen::VectorXd dl = Eigen::VectorXd::Zero(2), du = Eigen::VectorXd::Zero(2);
    int other = 1 - true_class_;
    dl(true_class_) = dlogits(true_class_);
    du(other) = dlogits(other);

    // Gradients carried into the current layer's pre-activation expressions.
    Eigen::MatrixXd cAL, cAU;
    Eigen::VectorXd ccL, ccU;

    for (std::size_t k = K; k-- > 0;) {
        const auto& W = layers[k].W;
        const Layer& L = layers_[k];
        const auto n = W.rows();
        Eigen::VectorXd dls = Eigen::VectorXd::Zero(n), dus = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd dnl = Eigen::VectorXd::Zero(n), dnu = Eigen::VectorXd::Zero(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            auto js = static_cast<std::size_t>(j);
            (L.pick_sym_l[js] ? dls : dnl)(j) = dl(j);
            (L.pick_sym_u[js] ? dus : dnu)(j) = du(j);
        }
        Eigen::MatrixXd dAL, dAU;
        Eigen::VectorXd dcL, dcU;
        if (symbolic_) {
            dAL = row_min_grad(L.AL, dls, vlo_, vhi_);
            dAU = row_max_grad(L.AU, dus, vlo_, vhi_);
            dcL = dls;
            dcU = dus;
            if (k + 1 < K) {
                dAL += cAL;
                dAU += cAU;
                dcL += ccL;
                dcU += ccU;
            }
        }
        g.db[k] += dnl + dnu;
        if (k == 0) {
            Eigen::MatrixXd pos = dnl * lo_.transpose() + dnu * hi_.transpose();
            Eigen::MatrixXd neg = dnl * hi_.transpose() + dnu * lo_.transpose();
            g.dW[0] += select_sign(W, pos, neg);
            if (symbolic_) {
                Eigen::VectorXd dc = dcL + dcU;
                g.db[0] += dc;
                g.dW[0] += dc * x0_.transpose();
                for (Eigen::Index j = 0; j < f; ++j) g.dW[0].col(free_[j]) += dAL.col(j) + dAU.col(j);
            }
            break;
        }
        const Layer& P = layers_[k - 1];
        Eigen::MatrixXd Wp = W.cwiseMax(0.0);
        Eigen::MatrixXd Wn = W.cwiseMin(0.0);
        Eigen::MatrixXd gpos = dnl * P.pl.transpose() + dnu * P.pu.transpose();
        Eigen::MatrixXd gneg = dnl * P.pu.transpose() + dnu * P.pl.transpose();
        Eigen::VectorXd dpl = Wp.transpose() * dnl + Wn.transpose() * dnu;
        Eigen::VectorXd dpu = Wp.transpose() * dnu + Wn.transpose() * dnl;
        Eigen::MatrixXd dpAL, dpAU;
        Eigen::VectorXd dpcL, dpcU;
        if (symbolic_) {
            g.db[k] += dcL + dcU;
            gpos += dAL * P.pAL.transpose() + dAU * P.pAU.transpose() + dcL * P.pcL.transpose() +
                    dcU * P.pcU.transpose();
            gneg += dAL * P.pAU.transpose() + dAU * P.pAL.transpose() + dcL * P.pcU.transpose() +
                    dcU * P.pcL.transpose();
            dpAL = Wp.transpose() * dAL + Wn.transpose() * dAU;
            dpAU = Wp.transpose() * dAU + Wn.transpose() * dAL;
            dpcL = Wp.transpose() * dcL + Wn.transpose() * dcU;
            dpcU = Wp.transpose() * dcU + Wn.transpose() * dcL;
        }
        g.dW[k] += select_sign(W, gpos, gneg);

        // Through the ReLU of layer k-1.
        const auto m = P.l.size();
        Eigen::VectorXd ndl = Eigen::VectorXd::Zero(m), ndu = Eigen::VectorXd::Zero(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            switch (P.phase[static_cast<std::size_t>(j)]) {
                case 1:
                    ndl(j) = dpl(j);
                    ndu(j) = dpu(j);
                    break;
                case 2:
                    ndu(j) = dpu(j);
                    if (symbolic_) ndl(j) = -P.scale(j) * dpcU(j);
                    break;
                default:
                    break;
            }
        }
        if (symbolic_) {
            cAL = P.scale.asDiagonal() * dpAL;
            cAU = P.scale.asDiagonal() * dpAU;
            ccL = P.scale.cwiseProduct(dpcL);
            ccU = P.scale.cwiseProduct(dpcU);
        }
        dl = ndl;
        du = ndu;
    }
    g.dx = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model_->input_dim()));
    return g;
}

OutputBounds propagate_naive(const MlpModel& model, const Box& box) {
    return WorstCaseBound(model, box, kMalicious, {BoundMethod::Naive, nullptr}).bounds();
}

OutputBounds propagate_naive(const MlpModel& model, const IntervalRegion& region) {
    return propagate_naive(model, Box::from_region(region));
}

OutputBounds propagate_symbolic(const MlpModel& model, const Box& box) {
    return WorstCaseBound(model, box, kMalicious, {BoundMethod::Symbolic, nullptr}).bounds();
}

OutputBounds propagate_symbolic(const MlpModel& model, const IntervalRegion& region) {
    return propagate_symbolic(model, Box::from_region(region));
}

SymbolicState symbolic_state(const MlpModel& model, const Box& box) {
    // Recomputed here rather than exposing the tape internals.
    SymbolicState st;
    const auto dim = static_cast<Eigen::Index>(model.input_dim());
    Eigen::VectorXd x0 = box.lo;
    for (Eigen::Index i = 0; i < dim; ++i) {
        if (box.lo(i) < box.hi(i)) {
            st.free.push_back(i);
            x0(i) = 0;
        }
    }
    const auto f = static_cast<Eigen::Index>(st.free.size());
    Eigen::VectorXd vlo(f), vhi(f);
    for (Eigen::Index j = 0; j < f; ++j) {
        vlo(j) = box.lo(st.free[j]);
        vhi(j) = box.hi(st.free[j]);
    }
    WorstCaseBound wc(model, box, kMalicious, {BoundMethod::Symbolic, nullptr});
    st.output = wc.bounds();
    const auto& layers = model.layers();
    Eigen::MatrixXd AL, AU;
    Eigen::VectorXd cL, cU, pl, pu;
    for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
        const auto& W = layers[k].W;
        const auto& b = layers[k].b;
        Eigen::MatrixXd Wp = W.cwiseMax(0.0), Wn = W.cwiseMin(0.0);
        Eigen::VectorXd nl, nu;
        if (k == 0) {
            AL.resize(W.rows(), f);
            for (Eigen::Index j = 0; j < f; ++j) AL.col(j) = W.col(st.free[j]);
            AU = AL;
            cL = W * x0 + b;
            cU = cL;
            nl = Wp * box.lo + Wn * box.hi + b;
            nu = Wp * box.hi + Wn * box.lo + b;
        } else {
            Eigen::MatrixXd nAL = Wp * AL + Wn * AU, nAU = Wp * AU + Wn * AL;
            Eigen::VectorXd ncL = Wp * cL + Wn * cU + b, ncU = Wp * cU + Wn * cL + b;
            nl = Wp * pl + Wn * pu + b;
            nu = Wp * pu + Wn * pl + b;
            AL = nAL;
            AU = nAU;
            cL = ncL;
            cU = ncU;
        }
        Eigen::VectorXd l = (cL + row_min(AL, vlo, vhi)).cwiseMax(nl);
        Eigen::VectorXd u = (cU + row_max(AU, vlo, vhi)).cwiseMin(nu);
        SymbolicLayer s;
        s.pre_lo = l;
        s.pre_hi = u;
        pl = Eigen::VectorXd::Zero(l.size());
        pu = Eigen::VectorXd::Zero(l.size());
        for (Eigen::Index j = 0; j < l.size(); ++j) {
            if (l(j) >= 0) {
                pl(j) = l(j);
                pu(j) = u(j);
            } else if (u(j) <= 0) {
                AL.row(j).setZero();
                AU.row(j).setZero();
                cL(j) = cU(j) = 0;
            } else {
                double lam = u(j) / (u(j) - l(j));
                AL.row(j) *= lam;
                cL(j) *= lam;
                AU.row(j) *= lam;
                cU(j) = lam * (cU(j) - l(j));
                pu(j) = u(j);
            }
        }
        s.lower_coef = AL;
        s.upper_coef = AU;
        s.lower_const = cL;
        s.upper_const = cU;
        st.hidden.push_back(std::move(s));
    }
    return st;
}

RegionVerdict verify_region(const MlpModel& model, const IntervalRegion& region, int true_class, BoundMethod method) {
    WorstCaseBound wc(model, Box::from_region(region), true_class, {method, nullptr});
    const auto& z = wc.logits();
    double margin = z(true_class) - z(1 - true_class);
    return {margin > 0.0, margin};
}

Eigen::Vector2d worst_case_logits(const MlpModel& model, const IntervalRegion& region, int true_class,
                                  BoundMethod method) {
    return WorstCaseBound(model, Box::from_region(region), true_class, {method, nullptr}).logits();
}

VraResult vra(const MlpModel& model, const std::vector<LabeledVector>& samples, const Vocabulary& vocab,
              const PropertySpec& spec, BoundMethod method, std::size_t workers) {
    VraResult res;
    res.rows.resize(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
        const auto& s = samples[i];
        auto regions = regions_for(s.x, vocab, spec, s.id);
        if (regions.empty()) regions.push_back({s.x, s.x, s.id, {}});
        SampleVerification row{s.id, spec.label(), regions.size(), 0, true, std::numeric_limits<double>::infinity()};
        for (const auto& r : regions) {
            auto v = verify_region(model, r, kMalicious, method);
            row.regions_verified += v.verified;
            row.worst_margin = std::min(row.worst_margin, v.margin);
        }
        row.verified = row.regions_verified == row.regions_total;
        res.rows[i] = std::move(row);
    });
    std::size_t ok = 0;
    for (const auto& r : res.rows) ok += r.verified;
    res.vra = samples.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(samples.size());
    return res;
}

std::string verification_csv(const std::vector<SampleVerification>& rows) {
    std::ostringstream os;
    os << "sample_id,property,regions_total,regions_verified,verdict,worst_margin\n";
    os << std::setprecision(17);
    for (const auto& r : rows) {
        os << r.sample_id << ',' << r.property << ',' << r.regions_total << ',' << r.regions_verified << ','
           << (r.verified ? "verified" : "unknown") << ',' << r.worst_margin << '\n';
    }
    return os.str();
}

}  // namespace verdoc
