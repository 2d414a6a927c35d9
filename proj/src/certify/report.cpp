#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "certify/certify.hpp"
#include "certify/pipelines.hpp"
#include "core/error.hpp"
#include "io/json_writer.hpp"

namespace otstab {

std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

std::string csv_str(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

double certificate_value(const TrialRow& r)
{
    return r.certificate_log10 > 300.0 ? INFINITY : std::pow(10.0, r.certificate_log10);
}

void summary_fields(std::ostream& os, const StabilityReport& r, bool with_runtime, const char* indent)
{
    os << indent << "\"max_ratio\": " << json_number(r.max_ratio) << ",\n";
    os << indent << "\"min_margin\": " << json_number(r.min_margin) << ",\n";
    os << indent << "\"failures\": " << r.failures << ",\n";
    if (with_runtime) os << indent << "\"runtime_s\": " << json_number(r.runtime_s) << ",\n";
    os << indent << "\"mode\": " << json_string(to_string(r.config.mode)) << ",\n";
    os << indent << "\"trials\": " << r.rows.size() << ",\n";
    os << indent << "\"seed\": " << r.config.seed << ",\n";
    os << indent << "\"grid\": [" << r.config.nx << ", " << r.config.ny << "],\n";
    os << indent << "\"config_hash\": " << json_string(r.config_hash) << ",\n";
    os << indent << "\"constants\": {\"C1\": " << json_number(r.C1) << ", \"scale_log10\": " << json_number(r.scale_log10)
       << ", \"calibrated\": " << (r.calibrated ? "true" : "false") << ", \"note\": " << json_string(r.constants_note)
       << "},\n";
    os << indent << "\"certificate_line_log10\": " << json_number(r.line_log10) << ",\n";
    os << indent << "\"all_chain_ok\": " << (r.all_ok() ? "true" : "false") << "\n";
}

}  // namespace

void write_report_csv(std::ostream& os, const StabilityReport& r)
{
    os << "trial,seed,status,n_mu,n_nu,T_c,J_at_optimum,R1_minus_R2,atom_level,combine_gap,boundary_misfit,"
          "bound_formula,certificate_value,certificate_log10,formula_log10,empirical_ratio,identity_residual,"
          "transfer_residual,control_terminal,margin,chain_ok,below_certificate,eta1,eta2,R0,r,sigma_min,error\n";
    for (const auto& t : r.rows) {
        os << t.trial << ',' << t.seed << ',' << (t.ok ? "ok" : "failed") << ',' << t.n_mu << ',' << t.n_nu;
        if (t.ok) {
            for (double x : {t.T_c, t.J, t.R1_minus_R2, t.atom_level, t.combine_gap, t.boundary_misfit,
                             t.bound_formula, certificate_value(t), t.certificate_log10, t.formula_log10,
                             t.empirical_ratio, t.identity_residual, t.transfer_residual, t.control_terminal,
                             t.margin})
                os << ',' << format_double(x);
            os << ',' << (t.chain_ok ? 1 : 0) << ',' << (t.below_certificate ? 1 : 0);
            for (double x : {t.eta1, t.eta2, t.R0, t.r, t.sigma_min}) os << ',' << format_double(x);
        } else {
            os << std::string(22, ',');
        }
        os << ',' << csv_str(t.error) << '\n';
    }
}

void write_summary_json(std::ostream& os, const StabilityReport& r, bool with_runtime)
{
    os << "{\n";
    summary_fields(os, r, with_runtime, "  ");
    os << "}\n";
}

void write_report_json(std::ostream& os, const StabilityReport& r)
{
    os << "{\n  \"summary\": {\n";
    summary_fields(os, r, false, "    ");
    os << "  },\n  \"rows\": [";
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const auto& t = r.rows[i];
        os << (i ? ",\n" : "\n") << "    {\"trial\": " << t.trial << ", \"seed\": " << t.seed
           << ", \"ok\": " << (t.ok ? "true" : "false");
        if (t.ok) {
            os << ", \"T_c\": " << json_number(t.T_c) << ", \"J_at_optimum\": " << json_number(t.J)
               << ", \"R1_minus_R2\": " << json_number(t.R1_minus_R2) << ", \"boundary_misfit\": "
               << json_number(t.boundary_misfit) << ", \"bound_formula\": " << json_number(t.bound_formula)
               << ", \"certificate_log10\": " << json_number(t.certificate_log10)
               << ", \"empirical_ratio\": " << json_number(t.empirical_ratio) << ", \"margin\": " << json_number(t.margin)
               << ", \"chain_ok\": " << (t.chain_ok ? "true" : "false");
        } else {
            os << ", \"error\": " << json_string(t.error);
        }
        os << "}";
    }
    os << "\n  ]\n}\n";
}

void write_scatter_svg(std::ostream& os, const StabilityReport& r)
{
    struct P {
        double x, y;
        bool ok;
    };
    std::vector<P> pts;
    for (const auto& t : r.rows)
        if (t.ok && t.T_c > 0.0 && t.boundary_misfit > 0.0)
            pts.push_back({std::log10(t.boundary_misfit), std::log10(t.T_c), t.chain_ok});
    const double W = 640, H = 480, L = 70, R = 20, T = 40, B = 50;
    double x0 = -1, x1 = 0, y0 = -1, y1 = 0;
    if (!pts.empty()) {
        x0 = x1 = pts[0].x;
        y0 = y1 = pts[0].y;
        for (const auto& p : pts) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.y);
            y1 = std::max(y1, p.y);
        }
    }
    x0 -= 0.5;
    x1 += 0.5;
    y0 -= 0.5;
    y1 += 0.5;
    // show the certificate line when it is within a few decades of the data
    const bool line = std::isfinite(r.line_log10);
    if (line) {
        const double top = r.line_log10 + x1;
        if (top > y1 && top < y1 + 6.0) y1 = top + 0.25;
    }
    auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    auto f = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", v);
        return std::string(buf);
    };
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<defs><clipPath id=\"plot\"><rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R
       << "\" height=\"" << H - T - B << "\"/></clipPath></defs>\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">T_c vs boundary misfit ("
       << to_string(r.config.mode) << ", " << r.rows.size() << " trials)</text>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
       << "\" text-anchor=\"middle\" font-size=\"12\">log10 boundary misfit</text>\n";
    os << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
       << H / 2 << ")\">log10 T_c</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        os << "<text x=\"" << f(sx(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
           << f(xv) << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << f(sy(yv) + 3) << "\" text-anchor=\"end\" font-size=\"10\">" << f(yv)
           << "</text>\n";
    }
    if (line) {
        os << "<line clip-path=\"url(#plot)\" x1=\"" << f(sx(x0)) << "\" y1=\"" << f(sy(r.line_log10 + x0))
           << "\" x2=\"" << f(sx(x1)) << "\" y2=\"" << f(sy(r.line_log10 + x1))
           << "\" stroke=\"firebrick\" stroke-width=\"1.5\"/>\n";
        if (r.line_log10 + x0 > y1)
            os << "<text x=\"" << L + 8 << "\" y=\"" << T + 16 << "\" font-size=\"11\" fill=\"firebrick\">certificate "
               << "line above the plot (slope 10^" << f(r.line_log10) << ")</text>\n";
    }
    for (const auto& p : pts)
        os << "<circle cx=\"" << f(sx(p.x)) << "\" cy=\"" << f(sy(p.y)) << "\" r=\"3.5\" fill=\""
           << (p.ok ? "steelblue" : "orange") << "\"/>\n";
    os << "</svg>\n";
}

void write_report_files(const std::string& dir, const StabilityReport& r)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorCode::io, "cannot create output directory " + dir);
    auto put = [&](const std::string& name, const std::string& body) {
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        require(static_cast<bool>(out), ErrorCode::io, "cannot write " + (fs::path(dir) / name).string());
        out << body;
        require(static_cast<bool>(out), ErrorCode::io, "write failed for " + name);
    };
    std::ostringstream csv, rj, sj, svg;
    write_report_csv(csv, r);
    write_report_json(rj, r);
    write_summary_json(sj, r, true);
    write_scatter_svg(svg, r);
    put("report.csv", csv.str());
    put("report.json", rj.str());
    put("summary.json", sj.str());
    put("scatter.svg", svg.str());

    write_manifest(dir, r.config, "stability", {"report.csv", "report.json", "summary.json", "scatter.svg"});
}

}  // namespace otstab
