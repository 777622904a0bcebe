#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "superalign/cloud_io.hpp"
#include "superalign/metrics.hpp"
#include "superalign/synthetic.hpp"

using namespace superalign;

namespace {

namespace fs = std::filesystem;

std::string cli_path() { return SUPERALIGN_CLI_PATH; }

int run_cli(const std::string& args, std::string* output = nullptr) {
    const fs::path out_file = fs::temp_directory_path() / "superalign_cli_out.txt";
    const std::string cmd = cli_path() + " " + args + " > " + out_file.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (output) {
        std::ifstream in(out_file);
        std::ostringstream ss;
        ss << in.rdbuf();
        *output = ss.str();
    }
    fs::remove(out_file);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

struct CliFixture {
    fs::path dir;
    fs::path source, target, gt_pose, config;
    RigidTransform gt;

    CliFixture() {
        dir = fs::temp_directory_path() / "superalign_cli_fixture";
        fs::create_directories(dir);
        SyntheticPairSpec spec;
        spec.point_count = 800;
        spec.seed = 99;
        const SyntheticPair pair = generate_synthetic_pair(spec);
        gt = pair.gt;
        source = dir / "source.xyz";
        target = dir / "target.xyz";
        gt_pose = dir / "gt.pose";
        config = dir / "pipeline.cfg";
        write_cloud(pair.source, source.string());
        write_cloud(pair.target, target.string());
        write_pose(pair.gt, gt_pose.string());
        std::ofstream cfg(config);
        cfg << "pipeline.voxel_size = 0.0075\ndescriptor.radius = 0.45\n";
    }
};

}  // namespace

TEST_CASE("cli: eval with est == gt prints zero errors and exits 0") {
    const CliFixture f;
    std::string out;
    const int code =
        run_cli("eval --est " + f.gt_pose.string() + " --gt " + f.gt_pose.string(), &out);
    CHECK(code == 0);
    CHECK(out.find("rre 0.000000") != std::string::npos);
    CHECK(out.find("rte 0.000000") != std::string::npos);
}

TEST_CASE("cli: register recovers the pose on an exact pair") {
    const CliFixture f;
    const fs::path pose = f.dir / "est.pose";
    const fs::path report = f.dir / "report.json";
    const int code = run_cli("register --source " + f.source.string() + " --target " +
                             f.target.string() + " --config " + f.config.string() + " --out-pose " +
                             pose.string() + " --out-report " + report.string());
    CHECK(code == 0);
    const RigidTransform est = read_pose(pose.string());
    CHECK(rre(est, f.gt) < 0.5);

    std::ifstream in(report);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string json = ss.str();
    for (const char* key : {"\"transform\"", "\"residual\"", "\"num_correspondences\"",
                            "\"filter_fraction\"", "\"timings\"", "\"weight_histogram\""}) {
        CHECK(json.find(key) != std::string::npos);
    }
}

TEST_CASE("cli: register with a missing file names the path and exits 2") {
    const CliFixture f;
    std::string out;
    const int code =
        run_cli("register --source /nonexistent/cloud.xyz --target " + f.target.string(), &out);
    CHECK(code == 2);
    CHECK(out.find("/nonexistent/cloud.xyz") != std::string::npos);
}

TEST_CASE("cli: unknown flags exit 2") {
    std::string out;
    const int code = run_cli("register --nonsense 1", &out);
    CHECK(code == 2);
}

TEST_CASE("cli: flagged pipeline results exit 1") {
    const CliFixture f;
    const fs::path cfg = f.dir / "stall.cfg";
    {
        std::ofstream out(cfg);
        // icp cannot find any correspondence inside a 1e-12 radius once the
        // clouds carry jitter, so the refinement stalls and gets flagged
        out << "pipeline.voxel_size = 0.0075\ndescriptor.radius = 0.45\n"
            << "estimator.kind = kabsch_icp\nicp.max_distance = 1e-12\n";
    }
    SyntheticPairSpec spec;
    spec.point_count = 500;
    spec.noise_sigma = 0.01;
    spec.seed = 12;
    const SyntheticPair pair = generate_synthetic_pair(spec);
    const fs::path source = f.dir / "noisy_src.xyz";
    const fs::path target = f.dir / "noisy_dst.xyz";
    write_cloud(pair.source, source.string());
    write_cloud(pair.target, target.string());

    std::string out;
    const int code = run_cli("register --source " + source.string() + " --target " +
                                 target.string() + " --config " + cfg.string(),
                             &out);
    CHECK(code == 1);
    CHECK(out.find("\"flagged\": true") != std::string::npos);
}

TEST_CASE("cli: match emits a correspondence CSV") {
    const CliFixture f;
    const fs::path csv = f.dir / "pairs.csv";
    const int code = run_cli("match --source " + f.source.string() + " --target " +
                             f.target.string() + " --matcher softmax --top-fraction 0.5 --config " +
                             f.config.string() + " --out " + csv.string());
    CHECK(code == 0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "src_idx,dst_idx,weight");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows >= 3);
}

TEST_CASE("cli: eval with clouds adds chamfer and inlier ratio lines") {
    const CliFixture f;
    std::string out;
    const int code = run_cli("eval --est " + f.gt_pose.string() + " --gt " + f.gt_pose.string() +
                                 " --source " + f.source.string() + " --target " + f.target.string() +
                                 " --config " + f.config.string(),
                             &out);
    CHECK(code == 0);
    CHECK(out.find("cd ") != std::string::npos);
    CHECK(out.find("ir ") != std::string::npos);
}

TEST_CASE("cli: demo-fit writes a trace with a decreasing loss") {
    const fs::path csv = fs::temp_directory_path() / "superalign_demo_trace.csv";
    const int code = run_cli("demo-fit --seed 1 --steps 40 --out " + csv.string());
    CHECK(code == 0);
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,total_loss,transformation_loss,feature_loss,overlap_loss,rre_deg");
    std::vector<double> totals;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto first_comma = line.find(',');
        const auto second_comma = line.find(',', first_comma + 1);
        totals.push_back(std::stod(line.substr(first_comma + 1, second_comma - first_comma - 1)));
    }
    REQUIRE(totals.size() == 41);
    CHECK(totals.back() < totals.front());
    fs::remove(csv);
}

TEST_CASE("cli: bench runs a two-combo suite deterministically") {
    const CliFixture f;
    const fs::path suite = f.dir / "suite.cfg";
    {
        std::ofstream out(suite);
        out << "pairs.count = 2\npairs.point_count = 400\npairs.seed = 3\n"
            << "pipeline.voxel_size = 0.0075\ndescriptor.radius = 0.45\n"
            << "combo.1.name = No filtering\ncombo.1.filter = 1.0\n"
            << "combo.2.name = top 15\ncombo.2.filter = 0.15\n";
    }
    const fs::path csv_a = f.dir / "bench_a.csv";
    const fs::path csv_b = f.dir / "bench_b.csv";

    // timing fields off so reruns compare byte for byte
    setenv("SUPERALIGN_TIMING", "off", 1);
    CHECK(run_cli("bench --suite " + suite.string() + " --out " + csv_a.string()) == 0);
    CHECK(run_cli("bench --suite " + suite.string() + " --out " + csv_b.string()) == 0);
    unsetenv("SUPERALIGN_TIMING");

    std::ifstream a(csv_a), b(csv_b);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    CHECK(sa.str().find("No filtering") != std::string::npos);
}
