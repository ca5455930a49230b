#include <gtest/gtest.h>

#include <sstream>

#include <optolever/config.hpp>
#include <optolever/io.hpp>

using namespace optolever;

namespace {

config::RunConfig parse(const std::string& text) {
  std::istringstream is(text);
  return config::RunConfig::parse(is);
}

}  // namespace

TEST(Config, DefaultsDescribeTheDevice) {
  const config::RunConfig cfg;
  const auto m = cfg.mode();
  EXPECT_NEAR(m.omega_m / (2 * pi), 52.5e3, 1e-6);
  EXPECT_NEAR(m.quality(), 3.3e7, 1.0);
  EXPECT_NEAR(m.inertia, 3.78e-18, 0.01e-18);
  EXPECT_NEAR(cfg.beam().waist, 60e-6, 1e-12);
}

TEST(Config, ParsesSectionsCommentsAndOverrides) {
  auto cfg = parse("# comment\n[beam]\nP = 2e-3  ; inline\n\n[run]\nseed=9\n");
  EXPECT_DOUBLE_EQ(cfg.beam().power, 2e-3);
  EXPECT_EQ(cfg.integer("run", "seed"), 9u);
  cfg.set_dotted("beam.w0=40e-6");
  EXPECT_DOUBLE_EQ(cfg.beam().waist, 40e-6);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse("[beam]\npower = 1\n"), ConfigError);
  EXPECT_THROW(parse("[nonsense]\n"), ConfigError);
  EXPECT_THROW(parse("P = 1\n"), ConfigError);
  EXPECT_THROW(parse("[beam\n"), ConfigError);
  const auto cfg = parse("[beam]\nP = one\n");
  EXPECT_THROW((void)cfg.beam(), ConfigError);
  config::RunConfig c;
  EXPECT_THROW(c.set_dotted("beamP=1"), ConfigError);
  EXPECT_THROW(config::RunConfig::load("/nonexistent/cfg.ini"), ConfigError);
}

TEST(Config, ErrorNamesTheLine) {
  try {
    parse("[beam]\n\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(Config, HashTracksResultRelevantKeysOnly) {
  config::RunConfig a, b;
  EXPECT_EQ(a.hash(), b.hash());
  b.set("run", "threads", "8");
  b.set("run", "out", "elsewhere");
  b.set("run", "format", "json");
  EXPECT_EQ(a.hash(), b.hash());
  b.set("run", "seed", "2");
  EXPECT_NE(a.hash(), b.hash());
  config::RunConfig c;
  c.set("beam", "P", "2e-3");
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(Config, EchoIncludesHash) {
  const config::RunConfig cfg;
  const auto j = cfg.echo();
  EXPECT_EQ(j["config_hash"], cfg.hash());
  EXPECT_DOUBLE_EQ(j["config"]["beam"]["P"].get<double>(), 1e-3);
}

TEST(Io, Fnv1aReferenceValues) {
  EXPECT_EQ(io::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(io::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(io::hex64(0xabcull), "0000000000000abc");
}

TEST(Io, CsvStartsWithHashAndRoundTrips) {
  RawSpectrum s{{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0},
                {0.1, 0.2, 1.0 / 3.0, 0.4, 0.5, 0.6, 0.7, 0.8}};
  std::ostringstream os;
  io::write_csv(os, io::raw_spectrum_table(s), "deadbeef");
  const std::string text = os.str();
  EXPECT_EQ(text.rfind("# config_hash=deadbeef\nfreq_hz,psd_v2_hz\n", 0), 0u);
  std::istringstream is(text);
  const auto back = io::read_raw_spectrum_csv(is);
  EXPECT_EQ(back.freqs, s.freqs);
  EXPECT_EQ(back.psd, s.psd);
}

TEST(Io, RawCsvErrors) {
  std::istringstream no_header("1,2\n");
  EXPECT_THROW(io::read_raw_spectrum_csv(no_header), DataError);
  std::istringstream junk("freq_hz,psd_v2_hz\n1,abc\n");
  EXPECT_THROW(io::read_raw_spectrum_csv(junk), DataError);
  std::istringstream few("freq_hz,psd_v2_hz\n1,2\n2,3\n");
  EXPECT_THROW(io::read_raw_spectrum_csv(few), DataError);
}

TEST(Io, JsonTableMapsNanToNull) {
  io::Table t{{"a", "b"}, {}};
  t.add({1.0, std::numeric_limits<double>::quiet_NaN()});
  const auto j = io::to_json(t, "h");
  EXPECT_TRUE(j["rows"][0][1].is_null());
  EXPECT_EQ(j["config_hash"], "h");
  EXPECT_THROW(t.add({1.0}), DataError);
}
