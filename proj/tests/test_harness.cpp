#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <ebt/harness.hpp>

using namespace ebt;

namespace {

ExperimentConfig frozen_config() {
    ExperimentConfig cfg;
    cfg.model = "two-sex";
    cfg.preset = "frozen";
    cfg.t_end = 0.2;
    cfg.support = 0.4;
    cfg.x_max = 0.8;
    cfg.widths = {0.1, 0.05, 0.025};
    cfg.output = "out";
    cfg.male = {"bump", {0.8, 0.0, 0.4}};
    cfg.female = {"bump", {0.9, 0.0, 0.4}};
    cfg.couple_x = {"bump", {0.3, 0.0, 0.4}};
    cfg.couple_y = {"bump", {0.3, 0.0, 0.4}};
    cfg.ref_h1 = 0.003125;
    cfg.ref_h2 = 0.0125;
    cfg.autonomous = true;
    return cfg;
}

ExperimentConfig scalar_config() {
    ExperimentConfig cfg;
    cfg.model = "scalar";
    cfg.preset = "renewal-constant";
    cfg.t_end = 0.2;
    cfg.support = 0.4;
    cfg.x_max = 0.8;
    cfg.widths = {0.1, 0.05, 0.025};
    cfg.density = {"gaussian", {1.0, 0.2, 0.06, 0.0, 0.4}};
    cfg.ref_h1 = 0.002;
    cfg.ref_dt = 0.002;
    return cfg;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("order fitting recovers exact slopes") {
    CHECK(fit_order({0.1, 0.05, 0.025}, {0.1, 0.05, 0.025}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit_order({0.01, 0.0025, 0.000625}, {0.1, 0.05, 0.025}) ==
          doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fit_order({0.3, 0.3, 0.3, 0.3}, {0.1, 0.05, 0.025, 0.0125}) ==
          doctest::Approx(0.0));
    CHECK_THROWS_AS(fit_order({0.1, 0.05}, {0.1, 0.05}), const input_error&);
    CHECK_THROWS_AS(fit_order({0.1, 0.05, 0.0}, {0.1, 0.05, 0.025}), const input_error&);
    CHECK_THROWS_AS(fit_order({0.1, 0.05, 0.025}, {0.1, 0.05}), const input_error&);
    CHECK_THROWS_AS(fit_order({0.1, 0.05, 0.025}, {0.1, 0.1, 0.1}), const input_error&);
}

TEST_CASE("profiles evaluate their closed forms") {
    const ProfileSpec uni{"uniform", {0.7, 0.1, 0.5}};
    CHECK(profile_value(uni, 0.3) == 0.7);
    CHECK(profile_value(uni, 0.6) == 0.0);
    const ProfileSpec b{"bump", {2.0, 0.0, 1.0}};
    CHECK(profile_value(b, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(profile_value(b, 0.0) == 0.0);
    CHECK(profile_value(b, 1.0) == 0.0);
    const ProfileSpec g{"gaussian", {1.0, 0.25, 0.1, 0.0, 0.5}};
    CHECK(profile_value(g, 0.25) == doctest::Approx(1.0));
    CHECK(profile_value(g, 0.35) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(profile_value(g, 0.7) == 0.0);

    CHECK_THROWS_AS(parse_profile("plateau 1 0 1", "p"), const config_error&);
    CHECK_THROWS_AS(parse_profile("bump 1 0", "p"), const config_error&);
    CHECK_THROWS_AS(parse_profile("bump 1 1 0", "p"), const config_error&);
    CHECK_THROWS_AS(parse_profile("gaussian 1 0.5 0 0 1", "p"), const config_error&);
    CHECK_THROWS_AS(parse_profile("", "p"), const config_error&);

    const auto round = parse_profile(format_profile(g), "p");
    CHECK(round == g);
}

TEST_CASE("config text parses and serializes to a fixed point") {
    const std::string text =
        "# convergence sweep                      \n"
        "[experiment]\n"
        "model = two-sex\n"
        "  preset=frozen   # pure transport\n"
        "t_end = 0.2\n"
        "support = 0.4\n"
        "x_max = 0.8\n"
        "widths = 0.1 0.05   0.025\n"
        "output = out\n"
        "[initial]\n"
        "male = bump 0.8 0 0.4\n"
        "female = bump 0.9 0 0.4\n"
        "couple_x = bump 0.3 0 0.4\n"
        "couple_y = bump 0.3 0 0.4\n"
        "[reference]\n"
        "h1 = 0.003125\n"
        "h2 = 0.0125\n"
        "autonomous = 1\n";
    const auto cfg = parse_config(text);
    CHECK(cfg == frozen_config());
    const auto canon = serialize_config(cfg);
    const auto cfg2 = parse_config(canon);
    CHECK(cfg2 == cfg);
    CHECK(serialize_config(cfg2) == canon);

    const auto scfg = scalar_config();
    CHECK(parse_config(serialize_config(scfg)) == scfg);
}

TEST_CASE("config validation rejects inconsistent setups") {
    const auto base = frozen_config();

    auto cfg = base;
    cfg.widths = {0.05, 0.1, 0.025};
    CHECK_THROWS_AS(validate_config(cfg), const config_error&);

    cfg = base;
    cfg.widths = {0.1, 0.05};
    CHECK_THROWS_AS(validate_config(cfg), const config_error&);

    cfg = base;
    cfg.x_max = 0.5;  // cannot contain support + t_end
    CHECK_THROWS_AS(validate_config(cfg), const config_error&);

    cfg = base;
    cfg.widths = {0.1, 0.05, 0.03};  // 0.03 does not partition 0.4
    CHECK_THROWS_AS(validate_config(cfg), const config_error&);

    cfg = base;
    cfg.ref_h1 = 0.005;  // h2/h1 not an integer
    CHECK_THROWS_AS(validate_config(cfg), const config_error&);

    cfg = base;
    cfg.preset = "unheard-of";
    CHECK_THROWS_AS(validate_config(cfg), const lookup_error&);

    cfg = base;
    cfg.male.params[2] = 0.6;  // profile spills past the support
    CHECK_THROWS_AS(validate_config(cfg), const config_error&);

    CHECK_THROWS_AS(parse_config("[experiment]\nmodel = two-sex\nmodel = scalar\n"),
                    const config_error&);
    CHECK_THROWS_AS(parse_config("[mystery]\nkey = 1\n"), const config_error&);
    CHECK_THROWS_AS(parse_config("[experiment]\nflavour = mint\n"), const config_error&);
    CHECK_THROWS_AS(parse_config("key = 1\n"), const config_error&);
}

TEST_CASE("pure transport sweep stays within the atomization bound") {
    const auto cfg = frozen_config();
    const auto rep = run_experiment(cfg);
    REQUIRE(rep.results.size() == 3);

    // Total initial mass per species bounds the flat distance between the
    // cohort atoms and the reference cells: half a width per unit mass for
    // the singles, half a cell diameter for the couples.
    const double m_male = 0.8 * 0.4 * 16.0 / 30.0;  // bump integral
    const double m_female = 0.9 * 0.4 * 16.0 / 30.0;
    const double m_couple = 0.3 * 0.3 * std::pow(0.4 * 16.0 / 30.0, 2.0);
    for (const auto& r : rep.results) {
        CHECK(r.error > 0.0);
        CHECK(r.male_error <= 0.5 * r.width * m_male * 1.1 + 1e-9);
        CHECK(r.female_error <= 0.5 * r.width * m_female * 1.1 + 1e-9);
        CHECK(r.couple_error <= 0.5 * (cfg.cell + cfg.cell) * m_couple * 1.1 + 1e-9);
        CHECK(r.diag.clamp_events == 0);
        CHECK(r.diag.denominator_floors == 0);
        CHECK(r.diag.cone_violations == 0);
    }
    CHECK(rep.valid);
    CHECK(rep.reference_error < rep.reference_allowance);
    // Singles dominate the composite and their error is pure atomization.
    CHECK(rep.order == doctest::Approx(1.0).epsilon(0.35));
}

TEST_CASE("scalar sweep converges against the characteristics solution") {
    const auto rep = run_experiment(scalar_config());
    REQUIRE(rep.results.size() == 3);
    for (std::size_t k = 1; k < rep.results.size(); ++k)
        CHECK(rep.results[k].error < rep.results[k - 1].error);
    CHECK(rep.valid);
    CHECK(rep.order == doctest::Approx(1.0).epsilon(0.4));
}

TEST_CASE("reports are deterministic and thread count does not matter") {
    const auto cfg = frozen_config();
    const auto rep1 = run_experiment(cfg, 1);
    const auto rep2 = run_experiment(cfg, 2);
    const auto text1 = format_report(rep1, cfg);
    const auto text2 = format_report(rep2, cfg);
    CHECK(text1 == text2);
    CHECK(text1.rfind("# ebt-report v1\n", 0) == 0);
    CHECK(text1.find("\norder,") != std::string::npos);
    CHECK(text1.find("\nvalid,1\n") != std::string::npos);
}

TEST_CASE("outputs land in the requested directory tree") {
    namespace fs = std::filesystem;
    const auto cfg = scalar_config();
    const auto rep = run_experiment(cfg);
    const fs::path dir = fs::temp_directory_path() / "ebt-harness-test";
    fs::remove_all(dir);
    write_outputs(rep, cfg, dir.string());
    CHECK(fs::exists(dir / "report.csv"));
    CHECK(fs::exists(dir / "diagnostics.log"));
    CHECK(fs::exists(dir / "snapshots" / "width-0.1-density.csv"));
    CHECK(fs::exists(dir / "snapshots" / "width-0.025-density.csv"));

    std::ifstream in(dir / "report.csv");
    std::string first;
    std::getline(in, first);
    CHECK(first == "# ebt-report v1");
    fs::remove_all(dir);
}

} // TEST_SUITE
