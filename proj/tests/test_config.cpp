#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "spinpat/config.hpp"
#include "spinpat/errors.hpp"
#include "spinpat/transport.hpp"
#include "support.hpp"

using namespace spinpat;
using nlohmann::json;

namespace {

json default_document() {
    std::ifstream in(testing::source_path("config/default.json"));
    return json::parse(in);
}

Config from(const json& doc, const std::vector<Override>& overrides = {}) {
    return config_from_json(doc, testing::source_path("config"), overrides);
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::Config;
}

}  // namespace

TEST_CASE("default parameters in SI") {
    const Config& c = testing::default_config();
    const auto& d = c.device;
    CHECK(d.channel.spin_relaxation == doctest::Approx(10.939e-12));
    CHECK(d.channel.dx == doctest::Approx(10e-9));
    CHECK(d.channel.length == doctest::Approx(212.5e-9));
    CHECK(d.channel.conductivity == doctest::Approx(41.549e6));
    CHECK(d.magnet_material.damping == doctest::Approx(0.0021));
    CHECK(d.magnet_material.anisotropy_density == doctest::Approx(0.5e5));
    CHECK(d.magnet_geometry.height == doctest::Approx(3e-9));
    CHECK(d.supply_voltage == doctest::Approx(5e-3));
    CHECK(d.interface.g_up == doctest::Approx(0.375));
    CHECK(c.experiments.training.size() == 3);
    CHECK(std::filesystem::exists(c.experiments.compare3x3_pattern));
    CHECK(std::filesystem::exists(c.experiments.detection_input));
}

TEST_CASE("unit reinterpretations are reported") {
    const Config& c = testing::default_config();
    auto noted = [&](const std::string& key) {
        for (const auto& n : c.notes)
            if (n.rfind(key, 0) == 0) return true;
        return false;
    };
    CHECK(noted("magnet.Ku"));
    CHECK(noted("magnet.Ns"));
    CHECK(noted("channel.sigma"));
    CHECK_FALSE(noted("channel.D"));
}

TEST_CASE("overrides") {
    const Config base = from(default_document());
    const Config faster = from(default_document(), {parse_override("channel.D=0.056")});
    CHECK(spin_diffusion_length(faster.device.channel) ==
          doctest::Approx(2.0 * spin_diffusion_length(base.device.channel)));
    const Config hot = from(default_document(), {parse_override("simulation.supply_voltage=10")});
    CHECK(hot.device.supply_voltage == doctest::Approx(10e-3));
    const Config seeds = from(default_document(), {parse_override("experiments.compare_seeds=4")});
    CHECK(seeds.experiments.compare_seeds == 4);

    CHECK(kind_of([] { parse_override("novalue"); }) == ErrorKind::Config);
    CHECK(kind_of([] { from(default_document(), {parse_override("channel.nope=1")}); }) == ErrorKind::Config);
}

TEST_CASE("rejected documents") {
    auto unknown = default_document();
    unknown["channel"]["spin_hall"] = 1.0;
    CHECK(kind_of([&] { from(unknown); }) == ErrorKind::Config);

    auto missing = default_document();
    missing["magnet"].erase("alpha");
    try {
        from(missing);
        FAIL("missing field accepted");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("magnet.alpha") != std::string::npos);
    }

    auto bad_unit = default_document();
    bad_unit["channel"]["L_int"]["unit"] = "kg";
    CHECK(kind_of([&] { from(bad_unit); }) == ErrorKind::Config);

    auto negative = default_document();
    negative["channel"]["tau_s"]["value"] = -1.0;
    CHECK_THROWS_AS(from(negative), Error);

    CHECK(kind_of([] { from(json::array()); }) == ErrorKind::Config);
}

TEST_CASE("parse errors carry a line and column") {
    const auto path = std::filesystem::temp_directory_path() / "spinpat_bad.json";
    std::ofstream(path) << "{\n  \"magnet\": {\n    \"alpha\": ,\n  }\n}\n";
    try {
        load_config(path);
        FAIL("malformed file accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    std::filesystem::remove(path);
    CHECK(kind_of([] { load_config("/nonexistent/params.json"); }) == ErrorKind::Io);
}

TEST_CASE("unit conversion") {
    CHECK(to_si(212.5, "nm", "m") == doctest::Approx(212.5e-9));
    CHECK(to_si(10.939, "ps", "s") == doctest::Approx(10.939e-12));
    CHECK(to_si(5.0, "mV", "V") == doctest::Approx(5e-3));
    std::string note;
    to_si(0.5e5, "J/m^2", "J/m^3", &note);
    CHECK_FALSE(note.empty());
    CHECK_THROWS_AS(to_si(1.0, "nm", "s"), Error);
}

TEST_CASE("describe reports resolved values") {
    const json d = describe(testing::default_config());
    CHECK(d.is_object());
    CHECK(d.dump().find("channel_conductivity_S_per_m") != std::string::npos);
}
