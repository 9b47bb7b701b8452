#pragma once

#include <fstream>
#include <random>
#include <string>

#include "fembem/adapt.hpp"

namespace fembem {

enum class ProblemName { LShapeLaplace, LShapeAnisotropic, ZShapeUnknown, ZShapeNonlinear };

struct ProblemSpec {
    std::string name;
    Domain domain = Domain::LShape;
    CoefficientModel model;
    ProblemData data;
    std::function<double(const Vec2&)> exact_u;    // interior solution, if known
    std::function<Vec2(const Vec2&)> exact_grad_u;
    double log_charge = 0.0; // coefficient a of the exterior a log|x| far field
    std::string description;
};

namespace benchdetail {

/// Polar angle measured counterclockwise from the positive x axis, remapped
/// into the domain's angular range (the excluded wedge sits below the
/// positive x axis for both benchmark domains).
inline double wedge_angle(const Vec2& x, double cut) {
    double phi = std::atan2(x.y, x.x);
    if (phi < cut) phi += 2.0 * M_PI;
    return phi;
}

/// u = r^alpha sin(alpha phi); grad u = alpha r^{alpha-1} (sin((alpha-1)phi), cos((alpha-1)phi)).
inline double corner_value(const Vec2& x, double alpha, double cut) {
    const double r = norm(x);
    if (r == 0.0) return 0.0;
    return std::pow(r, alpha) * std::sin(alpha * wedge_angle(x, cut));
}

inline Vec2 corner_gradient(const Vec2& x, double alpha, double cut) {
    const double r = norm(x);
    const double phi = wedge_angle(x, cut);
    const double s = alpha * std::pow(r, alpha - 1.0);
    return {s * std::sin((alpha - 1.0) * phi), s * std::cos((alpha - 1.0) * phi)};
}

/// u^ext for the L-shape problems: log|x - x0| with x0 = (-1/8,-1/8).
inline double lshape_uext(const Vec2& x) {
    const double X = x.x + 0.125, Y = x.y + 0.125;
    return 0.5 * std::log(X * X + Y * Y);
}

inline Vec2 lshape_grad_uext(const Vec2& x) {
    const double X = x.x + 0.125, Y = x.y + 0.125;
    const double s = X * X + Y * Y;
    return {X / s, Y / s};
}

/// u^ext for the nonlinear Z-shape problem: (x + y + 1/4) / |x - x0|^2, a
/// decaying harmonic function (combination of Re/Im of 1/w).
inline double zshape_uext(const Vec2& x) {
    const double X = x.x + 0.125, Y = x.y + 0.125;
    return (X + Y) / (X * X + Y * Y);
}

inline Vec2 zshape_grad_uext(const Vec2& x) {
    const double X = x.x + 0.125, Y = x.y + 0.125;
    const double s = X * X + Y * Y;
    const double n = X + Y;
    return {(s - 2.0 * X * n) / (s * s), (s - 2.0 * Y * n) / (s * s)};
}

constexpr double lshape_cut = -M_PI / 4.0;  // excluded wedge (-pi/2, 0), cut in its interior
constexpr double zshape_cut = -M_PI / 8.0;  // excluded wedge (-pi/4, 0)

} // namespace benchdetail

/// The four benchmark problems. `c` is the ellipticity parameter of the
/// anisotropic model A = diag(c, 1) and is ignored by the other problems.
inline ProblemSpec make_problem(ProblemName name, double c = 1.0) {
    using namespace benchdetail;
    ProblemSpec p;
    switch (name) {
        case ProblemName::LShapeLaplace: {
            p.name = "lshape-laplace";
            p.domain = Domain::LShape;
            p.model = make_identity();
            p.description = "L-shape, A = Id, u = r^{2/3} sin(2 phi / 3), log-type exterior";
            const double a = 2.0 / 3.0;
            p.exact_u = [a](const Vec2& x) { return corner_value(x, a, lshape_cut); };
            p.exact_grad_u = [a](const Vec2& x) { return corner_gradient(x, a, lshape_cut); };
            p.data.f = nullptr; // u harmonic
            p.data.u0 = [a](const Vec2& x) {
                return corner_value(x, a, lshape_cut) - lshape_uext(x);
            };
            p.data.grad_u0 = [a](const Vec2& x) {
                return corner_gradient(x, a, lshape_cut) - lshape_grad_uext(x);
            };
            p.data.phi0 = [a](const Vec2& x, const Vec2& nu) {
                return dot(corner_gradient(x, a, lshape_cut) - lshape_grad_uext(x), nu);
            };
            p.log_charge = 1.0;
            break;
        }
        case ProblemName::LShapeAnisotropic: {
            p.name = "lshape-anisotropic";
            p.domain = Domain::LShape;
            p.model = make_anisotropic(c);
            p.description = "L-shape, A = diag(c,1), same u as the Laplace benchmark";
            const double a = 2.0 / 3.0;
            p.exact_u = [a](const Vec2& x) { return corner_value(x, a, lshape_cut); };
            p.exact_grad_u = [a](const Vec2& x) { return corner_gradient(x, a, lshape_cut); };
            // f = -div A grad u = (1 - c) u_xx with u_xx = (2/9) r^{-4/3} sin(4 phi / 3)
            p.data.f = [c](const Vec2& x) {
                const double r = norm(x);
                const double phi = wedge_angle(x, lshape_cut);
                return (1.0 - c) * (2.0 / 9.0) * std::pow(r, -4.0 / 3.0) *
                       std::sin(4.0 * phi / 3.0);
            };
            p.data.u0 = [a](const Vec2& x) {
                return corner_value(x, a, lshape_cut) - lshape_uext(x);
            };
            p.data.grad_u0 = [a](const Vec2& x) {
                return corner_gradient(x, a, lshape_cut) - lshape_grad_uext(x);
            };
            p.data.phi0 = [a, c](const Vec2& x, const Vec2& nu) {
                const Vec2 g = corner_gradient(x, a, lshape_cut);
                const Vec2 flux{c * g.x, g.y};
                return dot(flux - lshape_grad_uext(x), nu);
            };
            p.log_charge = 1.0;
            break;
        }
        case ProblemName::ZShapeUnknown: {
            p.name = "zshape-unknown";
            p.domain = Domain::ZShape;
            p.model = make_anisotropic(c);
            p.description = "Z-shape, A = diag(c,1), data (f, u0, phi0) = (1, 0, 0), no exact solution";
            p.data.f = [](const Vec2&) { return 1.0; };
            p.data.u0 = nullptr;
            p.data.phi0 = nullptr;
            break;
        }
        case ProblemName::ZShapeNonlinear: {
            p.name = "zshape-nonlinear";
            p.domain = Domain::ZShape;
            p.model = make_benchmark_nonlinear();
            p.description = "Z-shape, A(y) = (2 + 1/(1+|y|)) y, u = r^{4/7} sin(4 phi / 7)";
            const double a = 4.0 / 7.0;
            p.exact_u = [a](const Vec2& x) { return corner_value(x, a, zshape_cut); };
            p.exact_grad_u = [a](const Vec2& x) { return corner_gradient(x, a, zshape_cut); };
            // f = -div(g(|grad u|) grad u) = alpha^2 (alpha-1) r^{2 alpha - 3}
            //     sin(alpha phi) / (1 + rho)^2 with rho = alpha r^{alpha-1}
            p.data.f = [a](const Vec2& x) {
                const double r = norm(x);
                const double phi = wedge_angle(x, zshape_cut);
                const double rho = a * std::pow(r, a - 1.0);
                return a * a * (a - 1.0) * std::pow(r, 2.0 * a - 3.0) * std::sin(a * phi) /
                       ((1.0 + rho) * (1.0 + rho));
            };
            p.data.u0 = [a](const Vec2& x) {
                return corner_value(x, a, zshape_cut) - zshape_uext(x);
            };
            p.data.grad_u0 = [a](const Vec2& x) {
                return corner_gradient(x, a, zshape_cut) - zshape_grad_uext(x);
            };
            CoefficientModel model = p.model;
            p.data.phi0 = [a, model](const Vec2& x, const Vec2& nu) {
                const Vec2 g = corner_gradient(x, a, zshape_cut);
                return dot(model.apply(g) - zshape_grad_uext(x), nu);
            };
            break;
        }
    }
    return p;
}

inline ProblemName problem_from_string(const std::string& s) {
    if (s == "lshape-laplace") return ProblemName::LShapeLaplace;
    if (s == "lshape-anisotropic") return ProblemName::LShapeAnisotropic;
    if (s == "zshape-unknown") return ProblemName::ZShapeUnknown;
    if (s == "zshape-nonlinear") return ProblemName::ZShapeNonlinear;
    throw std::invalid_argument("unknown problem name: " + s);
}

inline AdaptiveProblem to_adaptive(const ProblemSpec& spec) {
    AdaptiveProblem ap;
    ap.initial = build_initial(spec.domain);
    ap.model = spec.model;
    ap.data = spec.data;
    ap.exact_u = spec.exact_u;
    ap.exact_grad_u = spec.exact_grad_u;
    ap.log_charge = spec.log_charge;
    return ap;
}

struct RateReport {
    double alpha = 0.0;    // decay exponent: quantity ~ N^{-alpha}
    double residual = 0.0; // rms residual of the log-log fit
    int points = 0;
};

/// Least-squares slope of log(quantity) vs log(N) over the last `window`
/// rows carrying the quantity; alpha reported positive for decay.
inline RateReport fit_rate(const RunLog& log, const std::string& quantity, int window) {
    std::vector<double> xs, ys;
    for (const RunRow& r : log.rows) {
        double q;
        if (quantity == "err_omega") q = r.err_omega;
        else if (quantity == "est_total") q = r.est_total;
        else if (quantity == "est_omega") q = r.est_omega;
        else if (quantity == "est_gamma") q = r.est_gamma;
        else if (quantity == "h_max") q = r.h_max;
        else throw std::invalid_argument("fit_rate: unknown quantity " + quantity);
        if (std::isfinite(q) && q > 0.0 && r.n_triangles > 0) {
            xs.push_back(std::log(static_cast<double>(r.n_triangles)));
            ys.push_back(std::log(q));
        }
    }
    if (static_cast<int>(xs.size()) > window) {
        xs.erase(xs.begin(), xs.end() - window);
        ys.erase(ys.begin(), ys.end() - window);
    }
    const int n = static_cast<int>(xs.size());
    if (n < 4) throw std::invalid_argument("fit_rate: need at least 4 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / n;
    double rss = 0;
    for (int i = 0; i < n; ++i) {
        const double d = ys[i] - (slope * xs[i] + icpt);
        rss += d * d;
    }
    RateReport rep;
    rep.alpha = -slope;
    rep.residual = std::sqrt(rss / n);
    rep.points = n;
    return rep;
}

/// Static log-log SVG chart of err/estimator columns vs element count, with
/// reference-slope guide lines.
inline void write_loglog_svg(const RunLog& log, const std::string& path,
                             const std::vector<double>& ref_slopes = {1.0 / 3.0, 0.5}) {
    struct Series {
        std::string name, color;
        std::vector<std::pair<double, double>> pts;
    };
    std::vector<Series> series = {{"err_omega", "#1f77b4", {}},
                                  {"est_total", "#d62728", {}},
                                  {"est_omega", "#2ca02c", {}},
                                  {"est_gamma", "#9467bd", {}}};
    for (const RunRow& r : log.rows) {
        const double qs[4] = {r.err_omega, r.est_total, r.est_omega, r.est_gamma};
        for (int k = 0; k < 4; ++k)
            if (std::isfinite(qs[k]) && qs[k] > 0 && r.n_triangles > 0)
                series[k].pts.emplace_back(static_cast<double>(r.n_triangles), qs[k]);
    }
    double xmin = 1e300, xmax = 0, ymin = 1e300, ymax = 0;
    for (const Series& s : series)
        for (auto [x, y] : s.pts) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax <= 0 || ymax <= 0) throw std::runtime_error("write_loglog_svg: no plottable data");
    const double W = 640, H = 480, ml = 60, mr = 20, mt = 20, mb = 40;
    auto X = [&](double x) {
        return ml + (std::log(x) - std::log(xmin)) / (std::log(xmax) - std::log(xmin) + 1e-300) *
                        (W - ml - mr);
    };
    auto Y = [&](double y) {
        return H - mb - (std::log(y) - std::log(ymin)) /
                            (std::log(ymax) - std::log(ymin) + 1e-300) * (H - mt - mb);
    };
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_loglog_svg: cannot open " + path);
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<rect x='" << ml << "' y='" << mt << "' width='" << W - ml - mr << "' height='"
       << H - mt - mb << "' fill='none' stroke='black'/>\n";
    // reference slope guides anchored at the last est_total point
    for (double a : ref_slopes) {
        if (series[1].pts.size() < 2) break;
        auto [xn, yn] = series[1].pts.back();
        double x0 = series[1].pts.front().first;
        double y0 = yn * std::pow(x0 / xn, -a);
        os << "<line x1='" << X(x0) << "' y1='" << Y(std::min(y0, ymax)) << "' x2='" << X(xn)
           << "' y2='" << Y(yn) << "' stroke='#aaaaaa' stroke-dasharray='5,4'/>\n";
        os << "<text x='" << X(x0) + 4 << "' y='" << Y(std::min(y0, ymax)) + 12
           << "' font-size='11' fill='#888888'>N^-" << a << "</text>\n";
    }
    double legend_y = mt + 16;
    for (const Series& s : series) {
        if (s.pts.empty()) continue;
        os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
        for (auto [x, y] : s.pts) os << X(x) << "," << Y(y) << " ";
        os << "'/>\n";
        for (auto [x, y] : s.pts)
            os << "<circle cx='" << X(x) << "' cy='" << Y(y) << "' r='2.5' fill='" << s.color
               << "'/>\n";
        os << "<text x='" << W - mr - 110 << "' y='" << legend_y << "' font-size='12' fill='"
           << s.color << "'>" << s.name << "</text>\n";
        legend_y += 16;
    }
    os << "<text x='" << (W / 2 - 40) << "' y='" << H - 8
       << "' font-size='12'>number of elements N</text>\n";
    os << "</svg>\n";
}

} // namespace fembem
