#include "ieti/spline.hpp"

#include "ieti/error.hpp"

#include <algorithm>
#include <sstream>

namespace ieti {

UnivariateSpace::UnivariateSpace(int degree, int regularity, int interior_knots)
    : p_(degree), r_(regularity), k_(interior_knots)
{
    if (p_ < 1 || r_ < 0 || r_ >= p_ || k_ < 0) {
        std::ostringstream msg;
        msg << "invalid spline space p=" << p_ << " r=" << r_ << " k=" << k_;
        throw Error(ErrorKind::InvalidSpace, msg.str());
    }
    n_ = p_ + 1 + k_ * (p_ - r_);
    knots_.assign(p_ + 1, 0.0);
    for (int i = 1; i <= k_; ++i)
        for (int m = 0; m < p_ - r_; ++m)
            knots_.push_back(static_cast<double>(i) / (k_ + 1));
    knots_.insert(knots_.end(), p_ + 1, 1.0);
}

UnivariateSpace make_space(int p, int r, int k) { return UnivariateSpace(p, r, k); }

int UnivariateSpace::find_span(double xi) const
{
    if (!(xi >= 0.0 && xi <= 1.0))
        throw Error(ErrorKind::OutOfDomain, "parameter " + std::to_string(xi) + " outside [0,1]");
    if (xi >= 1.0)
        return n_ - 1;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), xi);
    return static_cast<int>(it - knots_.begin()) - 1;
}

UnivariateSpace::Local UnivariateSpace::eval(double xi, int max_deriv) const
{
    return eval_at_knot_span(xi, max_deriv, find_span(xi));
}

UnivariateSpace::Local UnivariateSpace::eval_in_span(double xi, int max_deriv, int span) const
{
    if (span < 0 || span > k_)
        throw Error(ErrorKind::OutOfDomain, "span index out of range");
    if (!(xi >= 0.0 && xi <= 1.0))
        throw Error(ErrorKind::OutOfDomain, "parameter " + std::to_string(xi) + " outside [0,1]");
    return eval_at_knot_span(xi, max_deriv, p_ + span * (p_ - r_));
}

// Derivatives of the p+1 nonzero B-splines on knot span mu (Piegl & Tiller, A2.3).
UnivariateSpace::Local UnivariateSpace::eval_at_knot_span(double u, int max_deriv, int mu) const
{
    const int p = p_;
    const int nd = std::min(max_deriv, p);
    const auto& t = knots_;
    Local out;
    out.first = mu - p;
    out.values = Matrix::Zero(max_deriv + 1, p + 1);

    Matrix ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = u - t[mu + 1 - j];
        right[j] = t[mu + j] - u;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j)
        out.values(0, j) = ndu(j, p);

    Matrix a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double d = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                d = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = rk >= -1 ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                d += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                d += a(s2, k) * ndu(r, pk);
            }
            out.values(k, r) = d;
            std::swap(s1, s2);
        }
    }
    double fac = p;
    for (int k = 1; k <= nd; ++k) {
        out.values.row(k) *= fac;
        fac *= (p - k);
    }
    return out;
}

Matrix UnivariateSpace::eval_all(double xi, int max_deriv) const
{
    Local loc = eval(xi, max_deriv);
    Matrix all = Matrix::Zero(max_deriv + 1, n_);
    all.middleCols(loc.first, p_ + 1) = loc.values;
    return all;
}

std::vector<double> UnivariateSpace::greville() const
{
    std::vector<double> g(n_);
    for (int j = 0; j < n_; ++j) {
        double s = 0.0;
        for (int i = 1; i <= p_; ++i)
            s += knots_[j + i];
        g[j] = s / p_;
    }
    g.front() = 0.0;
    g.back() = 1.0;
    return g;
}

TensorSpace::Local TensorSpace::eval(double xi1, double xi2, int max_deriv) const
{
    auto a = u_.eval(xi1, max_deriv);
    auto b = u_.eval(xi2, max_deriv);
    Local out;
    out.first = {a.first, b.first};
    out.d1 = std::move(a.values);
    out.d2 = std::move(b.values);
    return out;
}

std::array<int, 2> multi_index_pair(int idx)
{
    int o = 0;
    while ((o + 1) * (o + 2) / 2 <= idx)
        ++o;
    const int b = idx - o * (o + 1) / 2;
    return {o - b, b};
}

}  // namespace ieti
