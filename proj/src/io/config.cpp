#include "io/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "core/error.hpp"
#include "json.hpp"

namespace otstab {

using nlohmann::json;

const char* to_string(ExperimentMode m)
{
    switch (m) {
    case ExperimentMode::elliptic: return "elliptic";
    case ExperimentMode::parabolic: return "parabolic";
    case ExperimentMode::initial_data: return "initial_data";
    }
    return "?";
}

ExperimentMode parse_mode(const std::string& s)
{
    if (s == "elliptic") return ExperimentMode::elliptic;
    if (s == "parabolic") return ExperimentMode::parabolic;
    if (s == "initial_data") return ExperimentMode::initial_data;
    fail(ErrorCode::invalid_config, "unknown mode '" + s + "' (elliptic, parabolic, initial_data)");
}

namespace {

std::size_t line_of(const std::string& text, std::size_t pos)
{
    pos = std::min(pos, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Reader {
public:
    Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

    [[noreturn]] void error(const std::vector<std::string>& path, const std::string& msg) const
    {
        // walk the key path through the text to anchor the message
        std::size_t pos = 0;
        bool found = true;
        for (const auto& key : path) {
            const auto p = text_.find("\"" + key + "\"", pos);
            if (p == std::string::npos) {
                found = false;
                break;
            }
            pos = p;
        }
        std::string where;
        for (const auto& k : path) where += (where.empty() ? "" : ".") + k;
        const std::size_t line = found && !path.empty() ? line_of(text_, pos) : 1;
        fail(ErrorCode::invalid_config,
             source_ + ":" + std::to_string(line) + ": " + (where.empty() ? "" : where + ": ") + msg);
    }

    void check_keys(const json& obj, const std::vector<std::string>& path, const std::set<std::string>& allowed) const
    {
        if (!obj.is_object()) error(path, "expected an object");
        for (const auto& [k, _] : obj.items())
            if (!allowed.count(k)) {
                auto p = path;
                p.push_back(k);
                error(p, "unknown key");
            }
    }

    double number(const json& obj, const std::vector<std::string>& path, const std::string& key, double def) const
    {
        if (!obj.contains(key)) return def;
        const auto& v = obj.at(key);
        if (!v.is_number()) error(extend(path, key), "expected a number");
        return v.get<double>();
    }
    std::int64_t integer(const json& obj, const std::vector<std::string>& path, const std::string& key,
                         std::int64_t def) const
    {
        if (!obj.contains(key)) return def;
        const auto& v = obj.at(key);
        if (!v.is_number_integer()) error(extend(path, key), "expected an integer");
        return v.get<std::int64_t>();
    }
    std::string string(const json& obj, const std::vector<std::string>& path, const std::string& key,
                       const std::string& def) const
    {
        if (!obj.contains(key)) return def;
        const auto& v = obj.at(key);
        if (!v.is_string()) error(extend(path, key), "expected a string");
        return v.get<std::string>();
    }
    bool boolean(const json& obj, const std::vector<std::string>& path, const std::string& key, bool def) const
    {
        if (!obj.contains(key)) return def;
        const auto& v = obj.at(key);
        if (!v.is_boolean()) error(extend(path, key), "expected true or false");
        return v.get<bool>();
    }
    Vec2 point(const json& v, const std::vector<std::string>& path) const
    {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            error(path, "expected a point [x1, x2]");
        return {v[0].get<double>(), v[1].get<double>()};
    }

    static std::vector<std::string> extend(std::vector<std::string> p, const std::string& k)
    {
        p.push_back(k);
        return p;
    }

    const std::string& source() const { return source_; }

private:
    const std::string& text_;
    std::string source_;
};

template <class Fn>
void guarded(const Reader& r, const std::vector<std::string>& path, Fn&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        if (std::string(e.what()).rfind(r.source() + ":", 0) == 0) throw;  // already anchored
        r.error(path, e.what());
    }
}

AtomicMeasure read_measure(const Reader& r, const json& v, const std::vector<std::string>& path)
{
    if (!v.is_array() || v.empty()) r.error(path, "expected a non-empty list of atoms");
    AtomicMeasure m;
    for (const auto& a : v) {
        r.check_keys(a, path, {"s", "a"});
        if (!a.contains("s") || !a.contains("a")) r.error(path, "each atom needs \"s\" and \"a\"");
        m.atoms.push_back({r.point(a.at("s"), Reader::extend(path, "s")), r.number(a, path, "a", 0.0)});
    }
    return m;
}

}  // namespace

void ExperimentConfig::validate() const
{
    auto bad = [](const std::string& m) { fail(ErrorCode::invalid_config, m); };
    if (nx < 8 || ny < 8) bad("grid needs at least 8 nodes per axis");
    if (!(domain.lo.x1 < domain.hi.x1 && domain.lo.x2 < domain.hi.x2)) bad("empty domain");
    if (trials < 1) bad("trials must be at least 1");
    if (threads < 1) bad("threads must be at least 1");
    if (!(slack >= 0.0)) bad("slack must be nonnegative");
    if (sampling.M < 1) bad("M must be at least 1");
    if (mode == ExperimentMode::parabolic || mode == ExperimentMode::initial_data) {
        if (!(T > 0.0)) bad("T must be positive");
        if (nt < 64) bad("nt must be at least 64");
    }
    if (mode == ExperimentMode::parabolic) {
        if (!(tstar > 0.0 && tstar < T)) bad("need 0 < T* < T");
        if (K < 0) bad("K must be nonnegative");
        if (slots < static_cast<std::size_t>(4 * (2 * K + 1))) bad("slots must be at least 4(2K+1)");
        if (cost.kind != CostKind::spacetime) bad("parabolic mode needs the spacetime cost");
        if (mu || nu) bad("explicit measures are only supported in the elliptic and initial_data modes");
    }
    if (control.epsilon <= 0.0) bad("control.epsilon must be positive");
    if (control.max_iter < 1) bad("control.max_iter must be at least 1");
    if ((mu.has_value()) != (nu.has_value()) && !identical) bad("give both mu and nu, or set identical");
}

ExperimentConfig parse_config(const std::string& text, const std::string& source)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::invalid_config, source + ":" + std::to_string(line_of(text, e.byte ? e.byte - 1 : 0)) +
                                            ": malformed JSON: " + e.what());
    }
    Reader r(text, source);
    r.check_keys(j, {}, {"mode", "grid", "coefficients", "measures", "cost", "time", "basis", "control", "constants",
                         "slack", "trials", "seed", "output", "threads"});
    ExperimentConfig c;
    guarded(r, {"mode"}, [&] { c.mode = parse_mode(r.string(j, {}, "mode", "elliptic")); });
    if (c.mode == ExperimentMode::parabolic) c.cost.kind = CostKind::spacetime;

    if (j.contains("grid")) {
        const auto& g = j["grid"];
        const std::vector<std::string> p{"grid"};
        r.check_keys(g, p, {"nx", "ny", "domain"});
        const auto nx = r.integer(g, p, "nx", 129), ny = r.integer(g, p, "ny", nx);
        if (nx < 8 || ny < 8) r.error(Reader::extend(p, "nx"), "grid needs at least 8 nodes per axis");
        c.nx = static_cast<std::size_t>(nx);
        c.ny = static_cast<std::size_t>(ny);
        if (g.contains("domain")) {
            const auto& d = g["domain"];
            if (!d.is_array() || d.size() != 2) r.error(Reader::extend(p, "domain"), "expected [[lo1, lo2], [hi1, hi2]]");
            c.domain = {r.point(d[0], Reader::extend(p, "domain")), r.point(d[1], Reader::extend(p, "domain"))};
        }
    }
    if (j.contains("coefficients")) {
        const auto& g = j["coefficients"];
        const std::vector<std::string> p{"coefficients"};
        r.check_keys(g, p, {"kappa", "q", "sobolev_p"});
        c.kappa = r.string(g, p, "kappa", c.kappa);
        c.q = r.string(g, p, "q", c.q);
        c.sobolev_p = static_cast<int>(r.integer(g, p, "sobolev_p", c.sobolev_p));
        guarded(r, Reader::extend(p, "kappa"), [&] { (void)Expression::parse(c.kappa); });
        guarded(r, Reader::extend(p, "q"), [&] { (void)Expression::parse(c.q); });
    }
    if (j.contains("measures")) {
        const auto& g = j["measures"];
        const std::vector<std::string> p{"measures"};
        r.check_keys(g, p, {"M", "eta1_min", "eta2_min", "margin", "identical", "mu", "nu"});
        const auto M = r.integer(g, p, "M", static_cast<std::int64_t>(c.sampling.M));
        if (M < 1) r.error(Reader::extend(p, "M"), "M must be at least 1");
        c.sampling.M = static_cast<std::size_t>(M);
        c.sampling.eta1_min = r.number(g, p, "eta1_min", c.sampling.eta1_min);
        c.sampling.eta2_min = r.number(g, p, "eta2_min", c.sampling.eta2_min);
        c.sampling.margin = r.number(g, p, "margin", c.sampling.margin);
        c.identical = r.boolean(g, p, "identical", false);
        if (g.contains("mu")) c.mu = read_measure(r, g["mu"], Reader::extend(p, "mu"));
        if (g.contains("nu")) c.nu = read_measure(r, g["nu"], Reader::extend(p, "nu"));
    }
    if (j.contains("cost")) {
        const auto& g = j["cost"];
        const std::vector<std::string> p{"cost"};
        r.check_keys(g, p, {"kind", "cap", "scale", "lambda_t"});
        const auto kind = r.string(g, p, "kind", c.mode == ExperimentMode::parabolic ? "spacetime" : "truncated_euclidean");
        if (kind == "truncated_euclidean") c.cost.kind = CostKind::truncated_euclidean;
        else if (kind == "scaled_squared") c.cost.kind = CostKind::scaled_squared;
        else if (kind == "spacetime") c.cost.kind = CostKind::spacetime;
        else r.error(Reader::extend(p, "kind"), "unknown cost kind '" + kind + "'");
        c.cost.cap = r.number(g, p, "cap", c.cost.cap);
        c.cost.scale = r.number(g, p, "scale", c.cost.scale);
        c.cost.lambda_t = r.number(g, p, "lambda_t", c.cost.lambda_t);
        if (!(c.cost.cap > 0)) r.error(Reader::extend(p, "cap"), "cap must be positive");
        if (!(c.cost.scale > 0)) r.error(Reader::extend(p, "scale"), "scale must be positive");
        if (!(c.cost.lambda_t >= 0)) r.error(Reader::extend(p, "lambda_t"), "lambda_t must be nonnegative");
    }
    if (j.contains("time")) {
        const auto& g = j["time"];
        const std::vector<std::string> p{"time"};
        r.check_keys(g, p, {"T", "tstar", "nt", "K", "slots"});
        c.T = r.number(g, p, "T", c.T);
        c.tstar = r.number(g, p, "tstar", c.tstar);
        const auto nt = r.integer(g, p, "nt", static_cast<std::int64_t>(c.nt));
        if (nt < 64) r.error(Reader::extend(p, "nt"), "nt must be at least 64");
        c.nt = static_cast<std::size_t>(nt);
        c.K = static_cast<int>(r.integer(g, p, "K", c.K));
        if (c.K < 0) r.error(Reader::extend(p, "K"), "K must be nonnegative");
        const auto slots = r.integer(g, p, "slots", static_cast<std::int64_t>(c.slots));
        if (slots < 1) r.error(Reader::extend(p, "slots"), "slots must be positive");
        c.slots = static_cast<std::size_t>(slots);
        if (!(c.T > 0)) r.error(Reader::extend(p, "T"), "T must be positive");
        if (c.mode == ExperimentMode::parabolic && !(c.tstar > 0 && c.tstar < c.T))
            r.error(Reader::extend(p, "tstar"), "need 0 < T* < T");
    }
    if (j.contains("basis")) {
        const auto& g = j["basis"];
        const std::vector<std::string> p{"basis"};
        r.check_keys(g, p, {"r_mode", "r", "growth", "discrete_lift"});
        const auto mode = r.string(g, p, "r_mode", "capped");
        if (mode == "capped") c.basis.mode = RMode::capped;
        else if (mode == "auto") c.basis.mode = RMode::auto_r;
        else if (mode == "given") c.basis.mode = RMode::given;
        else r.error(Reader::extend(p, "r_mode"), "unknown r_mode '" + mode + "' (capped, auto, given)");
        c.basis.r = r.number(g, p, "r", c.basis.r);
        c.basis.growth = r.number(g, p, "growth", c.basis.growth);
        c.basis.discrete_lift = r.boolean(g, p, "discrete_lift", c.basis.discrete_lift);
        if (!(c.basis.r > 0)) r.error(Reader::extend(p, "r"), "r must be positive");
        if (!(c.basis.growth > 1)) r.error(Reader::extend(p, "growth"), "growth must exceed 1");
    }
    if (j.contains("control")) {
        const auto& g = j["control"];
        const std::vector<std::string> p{"control"};
        r.check_keys(g, p, {"epsilon", "terminal_tol", "max_iter", "stop_terminal"});
        c.control.epsilon = r.number(g, p, "epsilon", c.control.epsilon);
        c.control.terminal_tol = r.number(g, p, "terminal_tol", c.control.terminal_tol);
        c.control.max_iter = static_cast<int>(r.integer(g, p, "max_iter", c.control.max_iter));
        c.control.stop_terminal = r.number(g, p, "stop_terminal", c.control.stop_terminal);
        if (!(c.control.epsilon > 0)) r.error(Reader::extend(p, "epsilon"), "epsilon must be positive");
        if (c.control.max_iter < 1) r.error(Reader::extend(p, "max_iter"), "max_iter must be at least 1");
    }
    if (j.contains("constants")) {
        const auto& g = j["constants"];
        const std::vector<std::string> p{"constants"};
        r.check_keys(g, p, {"C1", "C3", "C4", "C5", "calibrate"});
        c.constants.C1_default = !g.contains("C1");
        c.constants.C3_default = !g.contains("C3");
        c.constants.C1 = r.number(g, p, "C1", 1.0);
        c.constants.C3 = r.number(g, p, "C3", 1.0);
        c.constants.C4 = r.number(g, p, "C4", 1.0);
        c.constants.C5 = r.number(g, p, "C5", 1.0);
        c.constants.calibrate = r.boolean(g, p, "calibrate", true);
        for (const char* k : {"C1", "C3", "C4", "C5"})
            if (!(r.number(g, p, k, 1.0) > 0)) r.error(Reader::extend(p, k), "constants must be positive");
    }
    c.slack = r.number(j, {}, "slack", c.slack);
    const auto trials = r.integer(j, {}, "trials", 1);
    if (trials < 1) r.error({"trials"}, "trials must be at least 1");
    c.trials = static_cast<std::size_t>(trials);
    const auto seed = r.integer(j, {}, "seed", 1);
    if (seed < 0) r.error({"seed"}, "seed must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);
    c.output = r.string(j, {}, "output", c.output);
    const auto threads = r.integer(j, {}, "threads", 1);
    if (threads < 1) r.error({"threads"}, "threads must be at least 1");
    c.threads = static_cast<std::size_t>(threads);
    guarded(r, {"mode"}, [&] { c.validate(); });
    return c;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::io, "cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

namespace {
json num(double x)
{
    // keep the canonical form free of locale and shortest-repr differences
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return json::parse(buf);
}
json measure_json(const AtomicMeasure& m)
{
    json a = json::array();
    for (const auto& x : m.atoms) a.push_back({{"s", {num(x.s.x1), num(x.s.x2)}}, {"a", num(x.a)}});
    return a;
}
}  // namespace

std::string canonical_json(const ExperimentConfig& c)
{
    json j;
    j["mode"] = to_string(c.mode);
    j["grid"] = {{"nx", c.nx},
                 {"ny", c.ny},
                 {"domain", {{num(c.domain.lo.x1), num(c.domain.lo.x2)}, {num(c.domain.hi.x1), num(c.domain.hi.x2)}}}};
    j["coefficients"] = {{"kappa", c.kappa}, {"q", c.q}, {"sobolev_p", c.sobolev_p}};
    j["measures"] = {{"M", c.sampling.M},
                     {"eta1_min", num(c.sampling.eta1_min)},
                     {"eta2_min", num(c.sampling.eta2_min)},
                     {"margin", num(c.sampling.margin)},
                     {"identical", c.identical}};
    if (c.mu) j["measures"]["mu"] = measure_json(*c.mu);
    if (c.nu) j["measures"]["nu"] = measure_json(*c.nu);
    const char* kinds[] = {"truncated_euclidean", "scaled_squared", "spacetime"};
    j["cost"] = {{"kind", kinds[static_cast<int>(c.cost.kind)]},
                 {"cap", num(c.cost.cap)},
                 {"scale", num(c.cost.scale)},
                 {"lambda_t", num(c.cost.lambda_t)}};
    j["time"] = {{"T", num(c.T)}, {"tstar", num(c.tstar)}, {"nt", c.nt}, {"K", c.K}, {"slots", c.slots}};
    const char* rmodes[] = {"auto", "given", "capped"};
    j["basis"] = {{"r_mode", rmodes[static_cast<int>(c.basis.mode)]},
                  {"r", num(c.basis.r)},
                  {"growth", num(c.basis.growth)},
                  {"discrete_lift", c.basis.discrete_lift}};
    j["control"] = {{"epsilon", num(c.control.epsilon)},
                    {"terminal_tol", num(c.control.terminal_tol)},
                    {"max_iter", c.control.max_iter},
                    {"stop_terminal", num(c.control.stop_terminal)}};
    j["constants"] = {{"C1", num(c.constants.C1)},
                      {"C3", num(c.constants.C3)},
                      {"C4", num(c.constants.C4)},
                      {"C5", num(c.constants.C5)},
                      {"calibrate", c.constants.calibrate}};
    j["slack"] = num(c.slack);
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    // output location and threads do not change results and stay out of the hash
    return j.dump(2);
}

std::string fnv1a_hex(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace otstab
