// Exercises the library only through the C header.
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "otstab/otstab.h"

namespace fs = std::filesystem;

TEST_CASE("status names and version")
{
    CHECK(std::string(otstab_version()).size() > 0);
    CHECK(std::string(otstab_status_name(OTSTAB_OK)) == "ok");
    CHECK(std::string(otstab_status_name(OTSTAB_INVALID_CONFIG)) != "ok");
}

TEST_CASE("config errors come back as codes with a line-anchored message")
{
    otstab_config* cfg = nullptr;
    const char* bad = "{\n  \"trials\": 2,\n  \"cost\": {\n    \"kind\": \"manhattan\"\n  }\n}\n";
    CHECK(otstab_config_from_string(bad, "bad.json", &cfg) == OTSTAB_INVALID_CONFIG);
    CHECK(cfg == nullptr);
    CHECK(std::string(otstab_last_error()).rfind("bad.json:4:", 0) == 0);

    CHECK(otstab_config_from_file("/nonexistent/cfg.json", &cfg) != OTSTAB_OK);
    CHECK(otstab_config_from_string(nullptr, nullptr, &cfg) == OTSTAB_INVALID_ARGUMENT);

    REQUIRE(otstab_config_default(&cfg) == OTSTAB_OK);
    CHECK(otstab_config_set_int(cfg, "trials", 0) == OTSTAB_INVALID_CONFIG);
    CHECK(otstab_config_set_int(cfg, "bogus", 1) == OTSTAB_INVALID_CONFIG);
    CHECK(otstab_config_set_string(cfg, "mode", "hyperbolic") == OTSTAB_INVALID_CONFIG);
    CHECK(otstab_config_set_string(cfg, "q", "1 +* x1") != OTSTAB_OK);
    CHECK(otstab_config_set_double(cfg, "T", NAN) == OTSTAB_INVALID_CONFIG);
    CHECK(otstab_config_set_int(cfg, "seed", 5) == OTSTAB_OK);
    CHECK(std::string(otstab_last_error()).empty());
    otstab_config_free(cfg);
}

TEST_CASE("hash ignores threads and follows the seed")
{
    otstab_config *a = nullptr, *b = nullptr;
    REQUIRE(otstab_config_from_string("{\"seed\": 3, \"threads\": 1}", nullptr, &a) == OTSTAB_OK);
    REQUIRE(otstab_config_from_string("{\"seed\": 3, \"threads\": 4}", nullptr, &b) == OTSTAB_OK);
    char ha[17], hb[17];
    REQUIRE(otstab_config_hash(a, ha) == OTSTAB_OK);
    REQUIRE(otstab_config_hash(b, hb) == OTSTAB_OK);
    CHECK(std::string(ha) == std::string(hb));
    CHECK(std::strlen(ha) == 16);
    otstab_config_set_int(b, "seed", 4);
    otstab_config_hash(b, hb);
    CHECK(std::string(ha) != std::string(hb));

    char* js = nullptr;
    REQUIRE(otstab_config_json(a, &js) == OTSTAB_OK);
    CHECK(std::string(js).find("\"seed\"") != std::string::npos);
    otstab_string_free(js);
    otstab_config_free(a);
    otstab_config_free(b);
}

TEST_CASE("mode switch carries the cost kind along")
{
    otstab_config* cfg = nullptr;
    REQUIRE(otstab_config_default(&cfg) == OTSTAB_OK);
    REQUIRE(otstab_config_set_string(cfg, "mode", "parabolic") == OTSTAB_OK);
    char* js = nullptr;
    otstab_config_json(cfg, &js);
    CHECK(std::string(js).find("spacetime") != std::string::npos);
    otstab_string_free(js);
    REQUIRE(otstab_config_set_string(cfg, "mode", "elliptic") == OTSTAB_OK);
    otstab_config_json(cfg, &js);
    CHECK(std::string(js).find("spacetime") == std::string::npos);
    otstab_string_free(js);
    otstab_config_free(cfg);
}

TEST_CASE("ot solve agrees with brute force on a 2x2 instance")
{
    const double a[2] = {0.4, 0.6}, b[2] = {0.5, 0.5};
    const double C[4] = {0.0, 1.0, 2.0, 0.5};
    double total = -1, brute = -1, plan[4], phi[2], psi[2];
    REQUIRE(otstab_ot_solve(a, 2, b, 2, C, &total, plan, phi, psi) == OTSTAB_OK);
    REQUIRE(otstab_ot_brute_force(a, 2, b, 2, C, &brute) == OTSTAB_OK);
    // 0.4 at (0,0), 0.1 at (1,0), 0.5 at (1,1).
    CHECK(total == doctest::Approx(0.4 * 0.0 + 0.1 * 2.0 + 0.5 * 0.5).epsilon(1e-12));
    CHECK(brute == doctest::Approx(total).epsilon(1e-12));
    double dual = phi[0] * a[0] + phi[1] * a[1] + psi[0] * b[0] + psi[1] * b[1];
    CHECK(dual == doctest::Approx(total).epsilon(1e-12));

    const double bad[1] = {2.0};
    CHECK(otstab_ot_solve(bad, 1, b, 2, C, &total, nullptr, nullptr, nullptr) != OTSTAB_OK);
}

TEST_CASE("smallest singular value of small matrices")
{
    const double re[4] = {3.0, 0.0, 0.0, 0.25};
    double s = 0;
    REQUIRE(otstab_smallest_singular_value(re, nullptr, 2, &s) == OTSTAB_OK);
    CHECK(s == doctest::Approx(0.25).epsilon(1e-12));
    // [[1, i], [i, 1]] times its adjoint is 2I.
    const double re2[4] = {1, 0, 0, 1}, im2[4] = {0, 1, 1, 0};
    REQUIRE(otstab_smallest_singular_value(re2, im2, 2, &s) == OTSTAB_OK);
    CHECK(s == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    // [[1, i], [i, -1]] is singular.
    const double re3[4] = {1, 0, 0, -1};
    REQUIRE(otstab_smallest_singular_value(re3, im2, 2, &s) == OTSTAB_OK);
    CHECK(std::abs(s) < 1e-12);
}

TEST_CASE("run, accessors and written files")
{
    otstab_config* cfg = nullptr;
    REQUIRE(otstab_config_from_string(R"({"grid": {"nx": 33, "ny": 33}, "measures": {"identical": true},
        "trials": 2, "seed": 5})",
                                      nullptr, &cfg) == OTSTAB_OK);
    otstab_report* rep = nullptr;
    REQUIRE(otstab_run(cfg, &rep) == OTSTAB_OK);
    REQUIRE(otstab_report_trial_count(rep) == 2);
    otstab_summary s;
    REQUIRE(otstab_report_summary(rep, &s) == OTSTAB_OK);
    CHECK(s.trials == 2);
    CHECK(s.failures == 0);
    CHECK(s.max_ratio == 0.0);
    for (size_t i = 0; i < 2; ++i) {
        otstab_trial t;
        REQUIRE(otstab_report_trial(rep, i, &t) == OTSTAB_OK);
        CHECK(t.ok == 1);
        CHECK(t.T_c == 0.0);
        CHECK(std::string(otstab_report_trial_error(rep, i)).empty());
    }
    otstab_trial t;
    CHECK(otstab_report_trial(rep, 2, &t) == OTSTAB_INVALID_ARGUMENT);

    char* csv = nullptr;
    REQUIRE(otstab_report_csv(rep, &csv) == OTSTAB_OK);
    CHECK(std::string(csv).rfind("trial,seed,status,", 0) == 0);
    otstab_string_free(csv);

    const auto dir = fs::temp_directory_path() / "otstab_capi_run";
    fs::remove_all(dir);
    REQUIRE(otstab_report_write(rep, dir.c_str()) == OTSTAB_OK);
    for (const char* f : {"report.csv", "report.json", "summary.json", "scatter.svg", "manifest.json"})
        CHECK(fs::exists(dir / f));
    fs::remove_all(dir);
    otstab_report_free(rep);

    char* summary = nullptr;
    int check = -1;
    CHECK(otstab_pipeline(cfg, "no-such-pipeline", nullptr, &summary, &check) != OTSTAB_OK);
    otstab_config_free(cfg);
}

TEST_CASE("pipeline runner: cgo basis with zero potential")
{
    otstab_config* cfg = nullptr;
    REQUIRE(otstab_config_from_string(R"({"grid": {"nx": 33, "ny": 33}, "coefficients": {"q": "0"}})", nullptr,
                                      &cfg) == OTSTAB_OK);
    char* summary = nullptr;
    int check = -1;
    REQUIRE(otstab_pipeline(cfg, "cgo-basis", nullptr, &summary, &check) == OTSTAB_OK);
    CHECK(check == 0);
    CHECK(std::string(summary).find("sigma_min") != std::string::npos);
    otstab_string_free(summary);
    otstab_config_free(cfg);
}
