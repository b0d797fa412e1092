#include "scmatch/conformal.hpp"

#include "scmatch/error.hpp"
#include "scmatch/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <limits>
#include <numbers>
#include <sstream>

namespace scmatch {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMaxPanelDepth = 1100;

const QuadRule& cached_rule(int n, double beta) {
    thread_local std::map<std::pair<int, double>, QuadRule> cache;
    auto it = cache.find({n, beta});
    if (it == cache.end()) it = cache.emplace(std::pair{n, beta}, gauss_jacobi(n, 0.0, beta)).first;
    return it->second;
}

/// A singular factor (1 - t e^{i d})^beta along the ray, with t = 1 - s.
struct RayFactor {
    Complex one_minus_e;  // 1 - e^{i d}, formed without cancellation
    Complex e;            // e^{i d}
    double beta;
    double x;  // s-coordinate of the prevertex projected on the ray
    double y;  // distance of the prevertex from the ray line
};

/// arg z_anchor - arg z_j for every j, summed over the shorter chain of gaps.
std::vector<double> anchor_differences(const ScDiskMap& map, int anchor) {
    const int n = map.size();
    std::vector<double> fwd(static_cast<std::size_t>(n), 0.0), bwd(static_cast<std::size_t>(n), 0.0);
    double acc = 0.0;
    for (int step = 1; step < n; ++step) {
        const int j = (anchor - step + n) % n;
        acc += map.gaps[j];
        fwd[j] = acc;
    }
    acc = 0.0;
    for (int step = 1; step < n; ++step) {
        const int j = (anchor + step) % n;
        acc += map.gaps[(j - 1 + n) % n];
        bwd[j] = acc;
    }
    std::vector<double> diff(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) diff[j] = (fwd[j] <= bwd[j]) ? fwd[j] : -bwd[j];
    diff[anchor] = 0.0;
    return diff;
}

Complex integrate_ray(const std::vector<RayFactor>& factors, double end_beta, int npts) {
    // Integral over s in [0, 1] of prod (one_minus_e + s e)^beta, with an
    // extra s^end_beta weight when the ray ends on a prevertex.
    Complex total{0.0, 0.0};
    const auto log_integrand = [&](double s) {
        Complex acc{0.0, 0.0};
        for (const auto& f : factors) acc += f.beta * std::log(f.one_minus_e + s * f.e);
        return acc;
    };
    const std::function<void(double, double, bool, int)> panel = [&](double sa, double sb, bool singular,
                                                                     int depth) {
        const double len = sb - sa;
        double dmin = std::numeric_limits<double>::infinity();
        for (const auto& f : factors) {
            const double dx = f.x < sa ? sa - f.x : (f.x > sb ? f.x - sb : 0.0);
            dmin = std::min(dmin, std::hypot(dx, f.y));
        }
        if (dmin < len) {
            if (depth >= kMaxPanelDepth || len <= 0.0)
                throw NumericalError("sc_eval: integration path touches a prevertex");
            const double mid = 0.5 * (sa + sb);
            panel(sa, mid, singular, depth + 1);
            panel(mid, sb, false, depth + 1);
            return;
        }
        if (singular && end_beta != 0.0) {
            const auto& rule = cached_rule(npts, end_beta);
            const double half = 0.5 * (sb - sa);
            const double scale = std::pow(half, end_beta + 1.0);
            for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
                const double s = sa + half * (rule.nodes[k] + 1.0);
                total += rule.weights[k] * scale * std::exp(log_integrand(s));
            }
        } else {
            const auto& rule = cached_rule(npts, 0.0);
            const double half = 0.5 * len;
            const double mid = 0.5 * (sa + sb);
            for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
                const double s = mid + half * rule.nodes[k];
                Complex lg = log_integrand(s);
                if (end_beta != 0.0) lg += end_beta * std::log(s);
                total += rule.weights[k] * half * std::exp(lg);
            }
        }
    };
    panel(0.0, 1.0, true, 0);
    return total;
}

Complex integrate_segment(const ScDiskMap& map, const std::vector<Complex>& zs, Complex from, Complex to) {
    const Complex delta = to - from;
    const double len = std::abs(delta);
    if (len == 0.0) return {0.0, 0.0};
    const int n = map.size();
    double beta0 = 0.0, beta1 = 0.0;
    struct Seg {
        Complex zj;
        double beta;
        int endpoint;  // -1 none, 0 at from, 1 at to
    };
    std::vector<Seg> sing;
    for (int j = 0; j < n; ++j) {
        if (map.betas[j] == 0.0) continue;
        int endpoint = -1;
        if (std::abs(from - zs[j]) <= 1e-14) {
            endpoint = 0;
            beta0 = map.betas[j];
        } else if (std::abs(to - zs[j]) <= 1e-14) {
            endpoint = 1;
            beta1 = map.betas[j];
        }
        sing.push_back({zs[j], map.betas[j], endpoint});
    }
    // log of the integrand at tau with endpoint factors split as tau * w.
    const auto log_integrand = [&](double tau) {
        Complex acc{0.0, 0.0};
        const Complex zeta = from + tau * delta;
        for (const auto& s : sing) {
            if (s.endpoint == 0)
                acc += s.beta * std::log(-delta / s.zj);
            else if (s.endpoint == 1)
                acc += s.beta * std::log(delta / s.zj);
            else
                acc += s.beta * std::log(1.0 - zeta / s.zj);
        }
        return acc;
    };
    Complex total{0.0, 0.0};
    const int npts = map.quadrature.points;
    const std::function<void(double, double, int)> panel = [&](double ta, double tb, int depth) {
        const double plen = tb - ta;
        double dmin = std::numeric_limits<double>::infinity();
        for (const auto& s : sing) {
            if (s.endpoint >= 0) continue;
            // Distance (in tau units) from the prevertex to the sub-segment.
            const Complex rel = (s.zj - from) / delta;
            const double dx = rel.real() < ta ? ta - rel.real() : (rel.real() > tb ? rel.real() - tb : 0.0);
            const double d = std::hypot(dx, rel.imag());
            if (d * len <= 1e-12 && depth == 0)
                throw NumericalError("sc_eval: integration path passes through a prevertex");
            dmin = std::min(dmin, d);
        }
        if (dmin < plen) {
            if (depth >= kMaxPanelDepth) throw NumericalError("sc_eval: integration path touches a prevertex");
            const double mid = 0.5 * (ta + tb);
            panel(ta, mid, depth + 1);
            panel(mid, tb, depth + 1);
            return;
        }
        const bool sing_a = (ta == 0.0 && beta0 != 0.0);
        const bool sing_b = (tb == 1.0 && beta1 != 0.0);
        // Weight (1 - x)^alpha (1 + x)^beta on [-1, 1].
        const double alpha = sing_b ? beta1 : 0.0;
        const double beta = sing_a ? beta0 : 0.0;
        const QuadRule rule = (alpha == 0.0) ? cached_rule(npts, beta) : gauss_jacobi(npts, alpha, beta);
        const double half = 0.5 * plen;
        const double scale = std::pow(half, alpha + beta + 1.0);
        for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
            const double x = rule.nodes[k];
            const double tau = ta + half * (x + 1.0);
            Complex lg = log_integrand(tau);
            // Endpoint powers not absorbed by the Jacobi weight.
            if (!sing_a && beta0 != 0.0) lg += beta0 * std::log(tau);
            if (!sing_b && beta1 != 0.0) lg += beta1 * std::log(1.0 - tau);
            total += rule.weights[k] * scale * std::exp(lg);
        }
    };
    panel(0.0, 1.0, 0);
    return total * delta;
}

}  // namespace

// ------------------------------------------------------------------- ScDiskMap

std::vector<double> ScDiskMap::arguments() const {
    const int n = size();
    std::vector<double> args(static_cast<std::size_t>(n), 0.0);
    const int p0 = pinned[0];
    double acc = 0.0;
    for (int step = 0; step < n; ++step) {
        const int j = (p0 + step) % n;
        args[j] = acc;
        acc += gaps[j];
    }
    return args;
}

std::vector<Complex> ScDiskMap::prevertices() const {
    const auto args = arguments();
    std::vector<Complex> z(args.size());
    for (std::size_t k = 0; k < args.size(); ++k) z[k] = std::polar(1.0, args[k]);
    return z;
}

double ScDiskMap::angle_between(int i, int j) const {
    return anchor_differences(*this, j)[i];
}

double ScDiskMap::chord(int i, int j) const { return 2.0 * std::abs(std::sin(0.5 * angle_between(i, j))); }

Complex ScDiskMap::point(const CirclePoint& p) const {
    return std::polar(1.0, arguments()[p.anchor] + p.offset);
}

Complex cross_ratio(Complex a, Complex b, Complex c, Complex d) {
    if (a == b || c == d) throw InputError("cross_ratio: coincident points in a denominator pair");
    return (d - a) * (b - c) / ((c - d) * (a - b));
}

Complex ray_integral(const ScDiskMap& map, const CirclePoint& p) {
    const int n = map.size();
    const auto diff = anchor_differences(map, p.anchor);
    std::vector<RayFactor> factors;
    double end_beta = 0.0;
    for (int j = 0; j < n; ++j) {
        if (map.betas[j] == 0.0) continue;
        if (j == p.anchor && p.offset == 0.0) {
            end_beta = map.betas[j];
            continue;
        }
        const double d = diff[j] + p.offset;
        const double sh = std::sin(0.5 * d);
        RayFactor f;
        f.one_minus_e = Complex(2.0 * sh * sh, -std::sin(d));
        f.e = Complex(std::cos(d), std::sin(d));
        f.beta = map.betas[j];
        f.x = 2.0 * sh * sh;
        f.y = std::abs(std::sin(d));
        factors.push_back(f);
    }
    const Complex z = std::polar(1.0, map.arguments()[p.anchor] + p.offset);
    return z * integrate_ray(factors, end_beta, map.quadrature.points);
}

Complex sc_eval_boundary(const ScDiskMap& map, const CirclePoint& p) {
    return map.center_image + map.scale * ray_integral(map, p);
}

Complex sc_eval(const ScDiskMap& map, Complex z, Complex path_from) {
    if (std::abs(z) > 1.0 + 1e-14 || std::abs(path_from) > 1.0 + 1e-14)
        throw InputError("sc_eval: point outside the closed unit disk");
    const auto zs = map.prevertices();
    Complex base = map.center_image;
    if (path_from != Complex{0.0, 0.0}) base += map.scale * integrate_segment(map, zs, {0.0, 0.0}, path_from);
    if (z == path_from) return base;
    return base + map.scale * integrate_segment(map, zs, path_from, z);
}

// --------------------------------------------------------------------- solver

namespace {

struct GapModel {
    int n = 0;
    std::array<int, 3> pinned{};
    // Gap indices of each arc, in order; the first gap of each arc has logit 0.
    std::array<std::vector<int>, 3> arcs;

    int unknowns() const {
        return static_cast<int>(arcs[0].size() + arcs[1].size() + arcs[2].size()) - 3;
    }

    std::vector<double> gaps(const Eigen::VectorXd& y) const {
        std::vector<double> g(static_cast<std::size_t>(n), 0.0);
        int k = 0;
        for (const auto& arc : arcs) {
            std::vector<double> logit(arc.size(), 0.0);
            for (std::size_t m = 1; m < arc.size(); ++m) logit[m] = y(k++);
            const double mx = *std::max_element(logit.begin(), logit.end());
            double sum = 0.0;
            for (double& l : logit) {
                l = std::exp(l - mx);
                sum += l;
            }
            for (std::size_t m = 0; m < arc.size(); ++m) g[arc[m]] = (kTwoPi / 3.0) * logit[m] / sum;
        }
        return g;
    }
};

GapModel make_gap_model(int n) {
    GapModel gm;
    gm.n = n;
    gm.pinned = {0, n / 3, (2 * n) / 3};
    for (int a = 0; a < 3; ++a) {
        const int from = gm.pinned[a];
        const int to = gm.pinned[(a + 1) % 3];
        for (int j = from; j != to; j = (j + 1) % n) gm.arcs[a].push_back(j);
    }
    return gm;
}

std::vector<Complex> raw_images(const ScDiskMap& map) {
    std::vector<Complex> z(static_cast<std::size_t>(map.size()));
    for (int k = 0; k < map.size(); ++k) z[k] = ray_integral(map, {k, 0.0});
    return z;
}

double log_abs_cross_ratio(const std::vector<Complex>& z, const std::array<int, 4>& q) {
    const Complex a = z[q[0]], b = z[q[1]], c = z[q[2]], d = z[q[3]];
    return std::log(std::abs(d - a)) + std::log(std::abs(b - c)) - std::log(std::abs(c - d)) -
           std::log(std::abs(a - b));
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

std::vector<double> parameter_residual(const ScDiskMap& map, const QuadSet& quads) {
    const auto z = raw_images(map);
    std::vector<double> F(quads.quads.size());
    for (std::size_t i = 0; i < quads.quads.size(); ++i)
        F[i] = log_abs_cross_ratio(z, quads.quads[i]) - quads.target_logs[i];
    return F;
}

ScDiskMap solve_parameter_problem(const Polygon& poly, const SolverOptions& opts) {
    return solve_parameter_problem(poly, delaunay_quads(poly), opts);
}

ScDiskMap solve_parameter_problem(const Polygon& poly, const QuadSet& quads, const SolverOptions& opts) {
    const int n = poly.size();
    if (n < 4) throw InputError("solve_parameter_problem: need at least 4 vertices");
    if (static_cast<int>(quads.quads.size()) != n - 3)
        throw InputError("solve_parameter_problem: quad set does not match polygon");
    const GapModel gm = make_gap_model(n);

    ScDiskMap map;
    map.betas = poly.betas;
    map.pinned = gm.pinned;
    map.quadrature = opts.quadrature;

    // Initial logits from polygon edge lengths.
    Eigen::VectorXd y(gm.unknowns());
    {
        int k = 0;
        for (const auto& arc : gm.arcs) {
            const auto edge_len = [&](int j) { return std::abs(poly.vertices[(j + 1) % n] - poly.vertices[j]); };
            const double l0 = edge_len(arc[0]);
            for (std::size_t m = 1; m < arc.size(); ++m) y(k++) = std::log(edge_len(arc[m]) / l0);
        }
    }

    const auto residual = [&](const Eigen::VectorXd& yy, Eigen::VectorXd& F) -> bool {
        map.gaps = gm.gaps(yy);
        try {
            const auto f = parameter_residual(map, quads);
            F = Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
        } catch (const NumericalError&) {
            return false;
        }
        return F.allFinite();
    };
    const auto jacobian = [&](const Eigen::VectorXd& yy, const Eigen::VectorXd& F0) {
        const Eigen::Index m = yy.size();
        Eigen::MatrixXd J(F0.size(), m);
        Eigen::VectorXd Fh;
        for (Eigen::Index k = 0; k < m; ++k) {
            Eigen::VectorXd yh = yy;
            const double h = 1e-6 * std::max(1.0, std::abs(yy(k)));
            yh(k) += h;
            if (!residual(yh, Fh)) {
                yh(k) = yy(k) - h;
                if (!residual(yh, Fh)) throw NumericalError("solve_parameter_problem: Jacobian evaluation failed");
                J.col(k) = (F0 - Fh) / h;
            } else {
                J.col(k) = (Fh - F0) / h;
            }
        }
        return J;
    };

    Eigen::VectorXd F;
    if (!residual(y, F)) throw NumericalError("solve_parameter_problem: residual at initial guess failed");
    Eigen::MatrixXd J;
    bool fresh = false;
    int iter = 0;
    if (gm.unknowns() > 0 && max_abs(F) > opts.tol) {
        J = jacobian(y, F);
        fresh = true;
    }
    for (; iter < opts.max_iter && gm.unknowns() > 0 && max_abs(F) > opts.tol; ++iter) {
        Eigen::VectorXd step = J.colPivHouseholderQr().solve(-F);
        const double smax = max_abs(step);
        if (smax > 8.0) step *= 8.0 / smax;
        double lambda = 1.0;
        bool accepted = false;
        Eigen::VectorXd yt, Ft;
        for (int h = 0; h <= opts.max_halvings; ++h, lambda *= 0.5) {
            yt = y + lambda * step;
            if (residual(yt, Ft) && Ft.norm() < F.norm()) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (fresh) break;
            J = jacobian(y, F);
            fresh = true;
            continue;
        }
        const Eigen::VectorXd s = yt - y;
        J += ((Ft - F) - J * s) * s.transpose() / s.squaredNorm();
        y = yt;
        F = Ft;
        fresh = false;
        if ((iter + 1) % opts.restart_every == 0 && max_abs(F) > opts.tol) {
            J = jacobian(y, F);
            fresh = true;
        }
    }
    map.gaps = gm.gaps(y);
    map.iterations = iter;
    map.residual = max_abs(F);
    if (!(map.residual <= opts.accept_tol))
        throw NumericalError("solve_parameter_problem: no convergence after " + std::to_string(iter) +
                                 " iterations (residual " + std::to_string(map.residual) + ")",
                             map.residual);

    // Similarity alignment of the raw images onto the polygon vertices.
    const auto raw = raw_images(map);
    Complex zm{0.0, 0.0}, wm{0.0, 0.0};
    for (int k = 0; k < n; ++k) {
        zm += raw[k];
        wm += poly.vertices[k];
    }
    zm /= static_cast<double>(n);
    wm /= static_cast<double>(n);
    Complex num{0.0, 0.0};
    double den = 0.0;
    for (int k = 0; k < n; ++k) {
        num += std::conj(raw[k] - zm) * (poly.vertices[k] - wm);
        den += std::norm(raw[k] - zm);
    }
    map.scale = num / den;
    map.center_image = wm - map.scale * zm;
    double align = 0.0;
    for (int k = 0; k < n; ++k)
        align = std::max(align, std::abs(map.center_image + map.scale * raw[k] - poly.vertices[k]));
    map.alignment_residual = align;
    if (align > 1e-6 * poly.diameter())
        throw NumericalError("solve_parameter_problem: alignment residual " + std::to_string(align) +
                                 " exceeds tolerance",
                             align);
    const auto crowded = std::count_if(map.gaps.begin(), map.gaps.end(), [](double g) { return g < 1e-12; });
    if (crowded > 0) {
        std::ostringstream msg;
        msg << "crowding: " << crowded << " prevertex gaps below 1e-12 (smallest "
            << std::scientific << std::setprecision(3) << *std::min_element(map.gaps.begin(), map.gaps.end())
            << ")";
        map.warnings.push_back(msg.str());
    }
    return map;
}

// -------------------------------------------------------------- rectangle map

RectMap disk_to_rectangle(const ScDiskMap& map, const std::array<int, 4>& corners) {
    const int n = map.size();
    for (int c : corners)
        if (c < 0 || c >= n) throw InputError("disk_to_rectangle: corner index out of range");
    for (int k = 1; k < 4; ++k) {
        const int prev = (corners[k - 1] - corners[0] + n) % n;
        const int cur = (corners[k] - corners[0] + n) % n;
        if (!(cur > prev)) throw InputError("disk_to_rectangle: corners not in cyclic order");
    }
    RectMap rect;
    rect.corners = corners;
    rect.aux = map;
    rect.aux.betas.assign(static_cast<std::size_t>(n), 0.0);
    for (int c : corners) rect.aux.betas[c] = -0.5;
    rect.aux.scale = {1.0, 0.0};
    rect.aux.center_image = {0.0, 0.0};
    for (int k = 0; k < 4; ++k) rect.corner_images[k] = ray_integral(rect.aux, {corners[k], 0.0});
    const Complex sw = rect.corner_images[0], se = rect.corner_images[1], nw = rect.corner_images[3];
    rect.modulus = std::abs(nw - sw) / std::abs(se - sw);
    return rect;
}

double RectMap::west_ordinate(const CirclePoint& p) const {
    const Complex g = ray_integral(aux, p);
    return ((g - corner_images[0]) / (corner_images[3] - corner_images[0])).real();
}

double RectMap::east_ordinate(const CirclePoint& p) const {
    const Complex g = ray_integral(aux, p);
    return ((g - corner_images[1]) / (corner_images[2] - corner_images[1])).real();
}

namespace {

/// Circle point on the arc from prevertex `from` (ccw) to `to` whose ordinate equals target.
CirclePoint locate_on_arc(const ScDiskMap& map, int from, int to, double target,
                          const std::function<double(const CirclePoint&)>& ordinate) {
    const int n = map.size();
    std::vector<int> idx;
    for (int j = from;; j = (j + 1) % n) {
        idx.push_back(j);
        if (j == to) break;
    }
    std::vector<double> ord(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) ord[k] = ordinate({idx[k], 0.0});
    const double sign = ord.back() > ord.front() ? 1.0 : -1.0;
    for (std::size_t k = 0; k < idx.size(); ++k)
        if (ord[k] == target) return {idx[k], 0.0};
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
        const double a = sign * (ord[k] - target), b = sign * (ord[k + 1] - target);
        if (!(a < 0.0 && b > 0.0)) continue;
        // Illinois regula falsi on the offset from prevertex idx[k].
        double lo = 0.0, hi = map.gaps[idx[k]];
        double flo = a, fhi = b;
        int side = 0;
        double x = lo;
        for (int it = 0; it < 200; ++it) {
            x = (lo * fhi - hi * flo) / (fhi - flo);
            if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
            const double fx = sign * (ordinate({idx[k], x}) - target);
            if (std::abs(fx) <= 1e-12 || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
            if (fx < 0.0) {
                lo = x;
                flo = fx;
                if (side == -1) fhi *= 0.5;
                side = -1;
            } else {
                hi = x;
                fhi = fx;
                if (side == 1) flo *= 0.5;
                side = 1;
            }
        }
        return {idx[k], x};
    }
    throw NumericalError("boundary_markers: ordinate " + std::to_string(target) +
                         " not bracketed on the arc (crowding?)");
}

}  // namespace

MarkerSet boundary_markers(const ScDiskMap& map, const RectMap& rect, int m) {
    if (m < 2) throw InputError("boundary_markers: need at least 2 markers");
    MarkerSet out;
    const auto west_ord = [&](const CirclePoint& p) { return rect.west_ordinate(p); };
    const auto east_ord = [&](const CirclePoint& p) { return rect.east_ordinate(p); };
    const int sw = rect.corners[0], se = rect.corners[1], ne = rect.corners[2], nw = rect.corners[3];
    for (int i = 0; i < m; ++i) {
        const double t = static_cast<double>(i) / (m - 1);
        CirclePoint wp, ep;
        if (i == 0) {
            wp = {sw, 0.0};
            ep = {se, 0.0};
        } else if (i == m - 1) {
            wp = {nw, 0.0};
            ep = {ne, 0.0};
        } else {
            wp = locate_on_arc(map, nw, sw, t, west_ord);
            ep = locate_on_arc(map, se, ne, t, east_ord);
        }
        const Complex fw = sc_eval_boundary(map, wp);
        const Complex fe = sc_eval_boundary(map, ep);
        out.west.emplace_back(fw.real(), fw.imag());
        out.east.emplace_back(fe.real(), fe.imag());
        out.west_circle.push_back(wp);
        out.east_circle.push_back(ep);
        out.ordinates.push_back(t);
    }
    return out;
}

}  // namespace scmatch
