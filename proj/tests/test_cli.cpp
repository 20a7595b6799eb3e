#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string cli = QTHERMO_CLI_PATH;
const fs::path configs = QTHERMO_CONFIG_DIR;

class Cli : public ::testing::Test {
protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("qthermo_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    /// Exit status of the CLI; stdout goes to `stdout_`.
    int run(const std::string& args)
    {
        const fs::path out = dir_ / "stdout.txt";
        const std::string cmd = "\"" + cli + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                                (dir_ / "stderr.txt").string() + "\"";
        const int status = std::system(cmd.c_str());
        stdout_ = slurp(out);
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    fs::path write_config(const std::string& name, const std::string& body)
    {
        const fs::path p = dir_ / name;
        std::ofstream(p) << body;
        return p;
    }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream is(p, std::ios::binary);
        std::ostringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }

    fs::path dir_;
    std::string stdout_;
};

} // namespace

TEST_F(Cli, SelftestPasses)
{
    EXPECT_EQ(run("selftest"), 0);
    EXPECT_NE(stdout_.find("PASS"), std::string::npos);
    EXPECT_EQ(stdout_.find("FAIL"), std::string::npos);
}

TEST_F(Cli, MalformedConfigsExitTwoWithoutOutputs)
{
    const fs::path out = dir_ / "out";
    const std::string bodies[] = {
        "{ not json",
        R"({"kind": "demon", "parameters": {"trials": 10}, "colour": "red"})",
        R"({"kind": "demon", "parameters": {"trials": 0}})",
        R"({"kind": "demon", "parameters": {"trials": 10, "n_photons": 3}})",
        R"({"kind": "teleport", "parameters": {}})",
        R"({"kind": "work_dist", "parameters": {"beta": 1.0, "initial": {}, "final": {"gamma_mag": 0.7}}})",
        R"({"kind": "thermometer", "parameters": {"q_hot": 0.3, "q_cold": 0.9, "p_values": [1.5]}})",
    };
    int k = 0;
    for (const auto& body : bodies) {
        const fs::path cfg = write_config("bad" + std::to_string(k++) + ".json", body);
        EXPECT_EQ(run("run \"" + cfg.string() + "\" --out \"" + out.string() + "\""), 2) << body;
        EXPECT_FALSE(fs::exists(out)) << body;
        EXPECT_FALSE(fs::exists(out.string() + ".partial")) << body;
    }
    EXPECT_EQ(run("run \"" + (dir_ / "missing.json").string() + "\""), 2);
    EXPECT_EQ(run("run \"" + (configs / "demon.json").string() + "\" --format xml"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(Cli, ConvergenceFailureExitsThree)
{
    const fs::path cfg = write_config("tight.json", R"({
        "kind": "work_dist",
        "parameters": {"beta": 0.5, "initial": {"gamma_mag": 0.3}, "final": {}},
        "truncation": {"initial_dim": 16, "max_dim": 32, "tolerance": 1e-12}
    })");
    const fs::path out = dir_ / "out";
    EXPECT_EQ(run("run \"" + cfg.string() + "\" --out \"" + out.string() + "\""), 3);
    EXPECT_FALSE(fs::exists(out));
}

TEST_F(Cli, DemonReplayIsByteIdentical)
{
    const fs::path a = dir_ / "a", b = dir_ / "b";
    const std::string cfg = (configs / "demon.json").string();
    ASSERT_EQ(run("run \"" + cfg + "\" --out \"" + a.string() + "\""), 0);
    ASSERT_EQ(run("run \"" + cfg + "\" --out \"" + b.string() + "\""), 0);
    const std::string ra = slurp(a / "results.json");
    EXPECT_FALSE(ra.empty());
    EXPECT_EQ(ra, slurp(b / "results.json"));

    const json doc = json::parse(ra);
    EXPECT_EQ(doc.at("results").at("trials"), 1000000);
    EXPECT_EQ(doc.at("version"), "0.1.0");
    EXPECT_EQ(doc.at("config").at("rng_seed"), doc.at("rng_seed"));

    const fs::path c = dir_ / "c";
    ASSERT_EQ(run("run \"" + cfg + "\" --seed 1 --out \"" + c.string() + "\""), 0);
    EXPECT_NE(slurp(c / "results.json"), ra);
    EXPECT_EQ(json::parse(slurp(c / "results.json")).at("rng_seed"), 1);
}

TEST_F(Cli, ShippedTableConfig)
{
    const fs::path out = dir_ / "t1";
    ASSERT_EQ(run("run \"" + (configs / "table1.json").string() + "\" --out \"" + out.string() + "\""), 0);
    const json rows = json::parse(slurp(out / "results.json")).at("results").at("rows");
    ASSERT_EQ(rows.size(), 5u);
    for (int r = 0; r < 3; ++r)
        EXPECT_TRUE(rows[r].at("pass").at("row").get<bool>()) << r;
    // Fourth row: the printed <W> is not reproduced (see the bare-population diagnostic).
    EXPECT_FALSE(rows[3].at("pass").at("work").get<bool>());
    EXPECT_TRUE(rows[3].at("pass").at("delta_f").get<bool>());
    EXPECT_NEAR(rows[3].at("bare_population_diagnostic").at("work").get<double>(), 0.92, 0.01);
    EXPECT_TRUE(rows[4].at("pass").at("row").get<bool>());
    EXPECT_EQ(rows[4].at("label"), "identity");
    const std::string csv = slurp(out / "table1.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "label,dim,work,paper_work,delta_f,paper_delta_f,jarzynski,paper_jarzynski,norm,paper_norm,sigma,"
              "bare_work,pass");
}

TEST_F(Cli, Table1CommandPrintsTable)
{
    ASSERT_EQ(run("table1 --dim 64"), 0);
    EXPECT_EQ(stdout_.rfind("label,dim,work", 0), 0u);
    EXPECT_NE(stdout_.find("identity,"), std::string::npos);
}

TEST_F(Cli, JsonFormatAndCharfnRoundTrip)
{
    const fs::path out = dir_ / "cf";
    ASSERT_EQ(run("run \"" + (configs / "charfn.json").string() + "\" --format json --out \"" + out.string() + "\""),
              0);
    const json res = json::parse(slurp(out / "results.json")).at("results");
    EXPECT_LT(res.at("max_atom_error").get<double>(), 1e-6);
    EXPECT_NEAR(res.at("g0").at("re").get<double>(), 1.0, 1e-12);
    const json rec = json::parse(slurp(out / "reconstructed.json"));
    ASSERT_TRUE(rec.is_array());
    EXPECT_TRUE(rec.at(0).contains("work"));
    EXPECT_FALSE(fs::exists(out / "reconstructed.csv"));
}

TEST_F(Cli, OamAndThermometerConfigs)
{
    const fs::path oam = dir_ / "oam", th = dir_ / "th";
    ASSERT_EQ(run("run \"" + (configs / "oam.json").string() + "\" --out \"" + oam.string() + "\""), 0);
    const json z = json::parse(slurp(oam / "results.json")).at("results").at("partition");
    EXPECT_NEAR(z.at("printed_over_closed").get<double>(),
                z.at("printed_form").get<double>() / z.at("closed_form").get<double>(), 1e-12);
    EXPECT_TRUE(fs::exists(oam / "transitions.json"));

    ASSERT_EQ(run("run \"" + (configs / "thermometer.json").string() + "\" --out \"" + th.string() + "\""), 0);
    const std::string csv = slurp(th / "thermometer.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "p,signal,helstrom,success,stderr");
}
