#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "xseg/field.hpp"

namespace fs = std::filesystem;

namespace {

std::string bin() {
    const char* b = std::getenv("XSEG_BIN");
    REQUIRE(b != nullptr);
    return b;
}

int run(const std::string& args) {
    std::string cmd = bin() + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

fs::path work() {
    fs::path p = fs::temp_directory_path() / "xseg_cli_test";
    return p;
}

void write_spec(const fs::path& p) {
    std::ofstream out(p);
    out << "# tiny dataset\n"
        << "n_volumes=5\n"
        << "split=0.6\n"
        << "complex_fraction=0.5\n"
        << "height=16\nwidth=16\ndepth=4\n"
        << "easy_r_min=4\neasy_r_max=5\neasy_w_min=2\neasy_w_max=3\n"
        << "complex_r_min=4\ncomplex_r_max=5\n"
        << "dr_min=1.5\ndr_max=2\n"
        << "drift=0.5\n"
        << "easy_distractors_min=0\neasy_distractors_max=1\n"
        << "complex_distractors_min=0\ncomplex_distractors_max=1\n";
}

}  // namespace

TEST_CASE("cli end to end on a tiny dataset") {
    fs::remove_all(work());
    fs::create_directories(work());
    fs::path spec = work() / "spec.cfg";
    write_spec(spec);

    SUBCASE("unknown subcommand and missing args exit 2") {
        CHECK(run("bogus") == 2);
        CHECK(run("phantom") == 2);  // missing --out
        CHECK(run("verify --suite nonsense") == 2);
    }

    SUBCASE("full pipeline") {
        fs::path data = work() / "data";
        CHECK(run("phantom --spec " + spec.string() + " --out " + data.string()) == 0);
        CHECK(fs::exists(data / "manifest.txt"));

        // identical seed regenerates identical bytes
        fs::path data2 = work() / "data2";
        CHECK(run("phantom --spec " + spec.string() + " --out " + data2.string()) == 0);
        CHECK(slurp(data / "vol_0000_img.f3d") == slurp(data2 / "vol_0000_img.f3d"));
        CHECK(slurp(data / "manifest.txt") == slurp(data2 / "manifest.txt"));

        // unknown config key fails fast
        fs::path bad = work() / "bad.cfg";
        std::ofstream(bad) << "definitely_not_a_key=1\n";
        CHECK(run("phantom --spec " + bad.string() + " --out " + (work() / "x").string()) == 2);

        // invalid spec names the field
        fs::path badspec = work() / "badspec.cfg";
        std::ofstream(badspec) << "easy_w_max=9\n";
        CHECK(run("phantom --spec " + badspec.string() + " --out " + (work() / "y").string()) == 2);

        fs::path manifest = data / "manifest.txt";
        fs::path pair_ckpt = work() / "pair.p4rn";
        CHECK(run("train-pairs --data " + manifest.string() + " --out " + pair_ckpt.string() +
                  " --epochs 2 --seed 3") == 0);
        CHECK(fs::exists(pair_ckpt));
        CHECK(fs::exists(work() / "pair.p4rn.history.csv"));

        // missing manifest is a usage error
        CHECK(run("train-pairs --data " + (work() / "none.txt").string() + " --out " +
                  (work() / "z.p4rn").string()) == 2);

        fs::path model_ckpt = work() / "model.segm";
        CHECK(run("train --data " + manifest.string() + " --pairnet " + pair_ckpt.string() +
                  " --target wall --out " + model_ckpt.string() +
                  " --epochs 2 --k_skel 3 --seed 5 --batch_size 4") == 0);
        CHECK(fs::exists(model_ckpt));
        CHECK(fs::exists(work() / "model.segm.report.csv"));

        // epochs 0 writes the seeded init
        fs::path init_ckpt = work() / "init.segm";
        CHECK(run("train --data " + manifest.string() + " --target wall --no-pair --out " +
                  init_ckpt.string() + " --epochs 0 --seed 5") == 0);
        CHECK(fs::exists(init_ckpt));

        // bad target exits 2
        CHECK(run("train --data " + manifest.string() + " --target neither --no-pair --out " +
                  (work() / "t.segm").string() + " --epochs 0") == 2);

        fs::path eval_csv = work() / "eval.csv";
        CHECK(run("eval --model " + model_ckpt.string() + " --data " + manifest.string() +
                  " --target wall --tier all --out " + eval_csv.string()) == 0);
        std::string eval_text = slurp(eval_csv);
        CHECK(eval_text.find("slice_id,volume,tier,iou_pct,dice_pct,hd95_px,flags") !=
              std::string::npos);
        CHECK(eval_text.find("config_hash=") != std::string::npos);

        // oracle predictions score perfectly
        fs::path oracle_csv = work() / "oracle.csv";
        CHECK(run("eval --data " + manifest.string() +
                  " --target wall --tier all --oracle 1 --out " + oracle_csv.string()) == 0);
        std::string oracle_text = slurp(oracle_csv);
        CHECK(oracle_text.find(",100,100,0,") != std::string::npos);

        // tier filter only keeps tagged volumes
        fs::path complex_csv = work() / "complex.csv";
        CHECK(run("eval --data " + manifest.string() +
                  " --target wall --tier complex --oracle 1 --out " + complex_csv.string()) == 0);
        std::string complex_text = slurp(complex_csv);
        CHECK(complex_text.find("vol_0004") != std::string::npos);  // the complex tail volume
        CHECK(complex_text.find("vol_0003") == std::string::npos);  // general-tier volume

        fs::path probe_csv = work() / "probe.csv";
        CHECK(run("probe --model " + model_ckpt.string() + " --data " + manifest.string() +
                  " --target wall --r 1 --topk 2 --out " + probe_csv.string()) == 0);
        std::string probe_text = slurp(probe_csv);
        CHECK(probe_text.find("slice_id,jsd,foi,fmi,leak_phi,leak_p,bcov_r1,iou,dice,hd95_px,flags") !=
              std::string::npos);
        CHECK(probe_text.find("e_cons_mean,") != std::string::npos);
        CHECK(fs::exists(work() / "overlays"));

        // oracle probe concentrates focus on the target
        fs::path oprobe = work() / "oprobe.csv";
        CHECK(run("probe --data " + manifest.string() +
                  " --target wall --oracle 1 --topk 0 --out " + oprobe.string()) == 0);
        std::string otext = slurp(oprobe);
        CHECK(otext.find("0.9999") != std::string::npos);  // FOI within eps of 1

        // probe reruns are byte-identical
        fs::path probe2 = work() / "probe2.csv";
        CHECK(run("probe --model " + model_ckpt.string() + " --data " + manifest.string() +
                  " --target wall --r 1 --topk 0 --out " + probe2.string()) == 0);
        fs::path probe3 = work() / "probe3.csv";
        CHECK(run("probe --model " + model_ckpt.string() + " --data " + manifest.string() +
                  " --target wall --r 1 --topk 0 --out " + probe3.string()) == 0);
        CHECK(slurp(probe2) == slurp(probe3));
    }
}
