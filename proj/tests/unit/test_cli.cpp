#include "fnd/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FND_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("CLI exit codes") {
    const auto dir = fs::temp_directory_path() / "fnd_unit_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    CHECK(run_cli("synth --out " + (dir / "data").string() + " --esp-docs 40 --kaggle-docs 40") == 0);

    const std::string good = R"({"experiment": "E1", "datasets": ["esp_fake"], "extractors": ["tfidf"],
        "paths": {"esp_fake_csv": "data/esp_fake.csv", "output": "runs"},
        "mlp": {"hidden": [4], "max_epochs": 5}})";
    fnd::io::write_file_atomic(dir / "good.json", good);
    CHECK(run_cli("validate " + (dir / "good.json").string()) == 0);
    CHECK(run_cli("run " + (dir / "good.json").string()) == 0);

    fnd::io::write_file_atomic(dir / "bad.json", R"({"experiment": "E1", "datasets": ["kaggle"], "extractors": ["beto"]})");
    CHECK(run_cli("validate " + (dir / "bad.json").string()) == 2);
    CHECK(run_cli("run " + (dir / "bad.json").string()) == 2);

    fnd::io::write_file_atomic(dir / "data/one.csv", "Id,Headline,Text,Category\n1,a,b,Fake\n");
    fnd::io::write_file_atomic(dir / "tiny.json", R"({"experiment": "E1", "datasets": ["esp_fake"], "extractors": ["tfidf"],
        "paths": {"esp_fake_csv": "data/one.csv", "output": "runs"}})");
    CHECK(run_cli("run " + (dir / "tiny.json").string()) == 3);
    CHECK(run_cli("report " + (dir / "nowhere").string()) == 3);
}
