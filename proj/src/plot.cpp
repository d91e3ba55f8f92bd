#include "urg/plot.hpp"

#include "urg/scenario.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace urg::app {

namespace {

constexpr double kW = 640, kH = 480, kM = 60;

std::string header() {
    return fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\">\n"
                       "<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n",
                       kW, kH, kW, kH, kW, kH);
}

// Maps [lo, hi] onto [a, b]; a degenerate range maps to the midpoint.
struct Axis {
    double lo, hi, a, b;
    double operator()(double v) const { return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : 0.5 * (a + b); }
};

std::string axes(const Axis& X, const Axis& Y, const std::string& xlabel, const std::string& ylabel) {
    std::string s;
    s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", X.a, Y.a, X.b, Y.a);
    s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", X.a, Y.a, X.a, Y.b);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
                     0.5 * (X.a + X.b), kH - 15, xlabel);
    s += fmt::format("<text x=\"15\" y=\"{:.2f}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.2f})\">{}</text>\n",
                     0.5 * (Y.a + Y.b), 0.5 * (Y.a + Y.b), ylabel);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"start\">{:.4g}</text>\n", X.a, Y.a + 16, X.lo);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n", X.b, Y.a + 16, X.hi);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n", X.a - 4, Y.a, Y.lo);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"11\" text-anchor=\"end\">{:.4g}</text>\n", X.a - 4, Y.b + 4, Y.hi);
    return s;
}

// Piecewise-linear blue-green-yellow ramp on [0, 1].
std::string colour(double u) {
    static const double stops[4][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {253, 231, 37}};
    u = std::clamp(u, 0.0, 1.0) * 3;
    int k = std::min(2, static_cast<int>(u));
    double f = u - k;
    int c[3];
    for (int i = 0; i < 3; ++i) c[i] = static_cast<int>(std::lround(stops[k][i] + f * (stops[k + 1][i] - stops[k][i])));
    return fmt::format("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("report", "cannot open report " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool ends_with(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

} // namespace

std::string plot_field(const std::string& csv) {
    std::stringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("report", "empty CSV");
    auto cols = split(line);
    auto find = [&](const std::string& n) {
        auto it = std::find(cols.begin(), cols.end(), n);
        return it == cols.end() ? -1 : static_cast<int>(it - cols.begin());
    };
    int ix = find("x"), iy = find("y"), iv = find("Dbeta");
    if (iv < 0) iv = find("u");
    if (iv < 0) iv = static_cast<int>(cols.size()) - 1;
    if (ix < 0 || iy < 0 || iv <= std::max(ix, iy)) throw ConfigError("report", "field CSV needs x, y and a value column");
    std::vector<double> X, Y, V;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto c = split(line);
        if (static_cast<int>(c.size()) <= iv) throw ConfigError("report", "short CSV row");
        X.push_back(std::stod(c[ix]));
        Y.push_back(std::stod(c[iy]));
        V.push_back(std::stod(c[iv]));
    }
    if (X.empty()) throw ConfigError("report", "field CSV has no rows");
    auto [xl, xh] = std::minmax_element(X.begin(), X.end());
    auto [yl, yh] = std::minmax_element(Y.begin(), Y.end());
    auto [vl, vh] = std::minmax_element(V.begin(), V.end());
    const double vlo = *vl, vhi = *vh;
    Axis ax{*xl, *xh, kM, kW - kM}, ay{*yl, *yh, kH - kM, kM};

    // average onto at most 96 x 96 cells, then colour in 12 bands
    const int N = 96;
    std::vector<double> sum(N * N, 0.0);
    std::vector<int> cnt(N * N, 0);
    auto cell = [](double v, double lo, double hi) {
        return hi > lo ? std::clamp(static_cast<int>((v - lo) / (hi - lo) * N), 0, N - 1) : 0;
    };
    for (std::size_t k = 0; k < X.size(); ++k) {
        int c = cell(X[k], ax.lo, ax.hi) + N * cell(Y[k], ay.lo, ay.hi);
        sum[c] += V[k];
        ++cnt[c];
    }
    std::string s = header();
    double cw = (ax.b - ax.a) / N, ch = (ay.a - ay.b) / N;
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            int c = i + N * j;
            if (!cnt[c]) continue;
            double v = sum[c] / cnt[c];
            double u = vhi > vlo ? (v - vlo) / (vhi - vlo) : 0.0;
            double band = std::min(11.0, std::floor(u * 12)) / 11;
            s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                             ax.a + i * cw, ay.a - (j + 1) * ch, cw, ch, colour(band));
        }
    s += axes(ax, ay, "x", "y");
    s += fmt::format("<text x=\"{:.2f}\" y=\"30\" font-size=\"13\" text-anchor=\"middle\">{} in [{:.4g}, {:.4g}]</text>\n",
                     0.5 * kW, cols[iv], vlo, vhi);
    s += "</svg>\n";
    return s;
}

std::string plot_curve(const std::vector<double>& r, const std::vector<double>& J) {
    if (r.empty() || r.size() != J.size()) throw ConfigError("report", "curve needs matching radii and values");
    std::vector<std::size_t> order(r.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
    std::vector<double> lx, y;
    for (std::size_t i : order) {
        if (!(r[i] > 0)) throw ConfigError("report", "radii must be positive");
        lx.push_back(std::log(r[i]));
        y.push_back(J[i]);
    }
    auto [yl, yh] = std::minmax_element(y.begin(), y.end());
    double pad = *yh > *yl ? 0.05 * (*yh - *yl) : 0.5 * std::max(1e-300, std::abs(*yh));
    Axis ax{lx.front(), lx.back(), kM, kW - kM}, ay{*yl - pad, *yh + pad, kH - kM, kM};
    std::string s = header();
    s += axes(ax, ay, "ln r", "J");
    s += "<polyline fill=\"none\" stroke=\"#3b528b\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < lx.size(); ++i) s += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", ax(lx[i]), ay(y[i]));
    s += "\"/>\n";
    for (std::size_t i = 0; i < lx.size(); ++i)
        s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"#21918c\"/>\n", ax(lx[i]), ay(y[i]));
    s += "</svg>\n";
    return s;
}

std::string plot_tree(const nlohmann::json& tree) {
    if (!tree.contains("cubes") || !tree.contains("k_min") || !tree.contains("k_max"))
        throw ConfigError("report", "tree JSON needs k_min, k_max and cubes");
    int k0 = tree["k_min"].get<int>(), k1 = tree["k_max"].get<int>();
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& c : tree["cubes"]) {
        double x = c["center"][0].get<double>(), l = std::ldexp(1.0, -c["k"].get<int>());
        lo = std::min(lo, x - l / 2), hi = std::max(hi, x + l / 2);
    }
    Axis ax{lo, hi, kM, kW - kM};
    int rows = k1 - k0 + 1;
    double rh = (kH - 2 * kM) / rows;
    std::string s = header();
    for (const auto& c : tree["cubes"]) {
        int k = c["k"].get<int>();
        double x = c["center"][0].get<double>(), l = std::ldexp(1.0, -k);
        double a = ax(x - l / 2), b = ax(x + l / 2);
        s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" stroke=\"black\" stroke-width=\"0.5\"/>\n",
                         a, kM + (k - k0) * rh + 1, std::max(0.5, b - a), rh - 2, colour(rows > 1 ? double(k - k0) / (rows - 1) : 0));
    }
    s += fmt::format("<text x=\"{:.2f}\" y=\"30\" font-size=\"13\" text-anchor=\"middle\">generations {} to {}</text>\n", 0.5 * kW, k0, k1);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"14\" text-anchor=\"middle\">x</text>\n", 0.5 * kW, kH - 15);
    s += "</svg>\n";
    return s;
}

std::string plot_file(const std::string& report, const std::string& kind) {
    const auto& kinds = plot_kinds();
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) throw ConfigError("kind", "unknown plot kind '" + kind + "'");
    std::string text = read_file(report);
    if (kind == "field") return plot_field(text);
    if (kind == "tree") {
        try {
            return plot_tree(nlohmann::json::parse(text));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("report", std::string("bad tree JSON: ") + e.what());
        }
    }
    std::vector<double> r, J;
    if (ends_with(report, ".json")) {
        try {
            auto j = nlohmann::json::parse(text);
            if (j.contains("radii") && j.contains("J")) {
                r = j["radii"].get<std::vector<double>>();
                J = j["J"].get<std::vector<double>>();
            } else if (j.contains("per_radius")) {
                for (const auto& e : j["per_radius"]) r.push_back(e["r"].get<double>()), J.push_back(e["sup"].get<double>());
            } else {
                throw ConfigError("report", "curve JSON needs radii and J, or per_radius");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("report", std::string("bad curve JSON: ") + e.what());
        }
    } else {
        std::stringstream in(text);
        std::string line;
        std::getline(in, line);
        auto cols = split(line);
        auto ir = std::find(cols.begin(), cols.end(), "r"), iJ = std::find(cols.begin(), cols.end(), "J");
        if (ir == cols.end() || iJ == cols.end()) throw ConfigError("report", "curve CSV needs r and J columns");
        std::size_t a = ir - cols.begin(), b = iJ - cols.begin();
        std::map<double, double> best;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto c = split(line);
            if (c.size() <= std::max(a, b)) throw ConfigError("report", "short CSV row");
            double rv = std::stod(c[a]), jv = std::stod(c[b]);
            auto it = best.find(rv);
            if (it == best.end() || jv > it->second) best[rv] = jv;
        }
        for (auto& [rv, jv] : best) r.push_back(rv), J.push_back(jv);
    }
    return plot_curve(r, J);
}

} // namespace urg::app
