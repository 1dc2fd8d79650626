// End-to-end smoke test: drives the real CLI binary through every verb's
// happy path on a 32-site synthetic corpus. Usage: cli_smoke <wfbench-path>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::string g_binary;
fs::path g_dir;

void step(const std::string& name, const std::string& args, int expected_exit = 0) {
  const std::string cmd = g_binary + " " + args + " >> " + (g_dir / "log.txt").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  const int exit_code = rc == -1 ? -1 : WEXITSTATUS(rc);
  const bool ok = exit_code == expected_exit;
  std::printf("%s %s (exit %d)\n", ok ? "ok " : "FAIL", name.c_str(), exit_code);
  if (!ok) ++g_failures;
}

void expect_file(const fs::path& p) {
  if (!fs::exists(p) || fs::file_size(p) == 0) {
    std::printf("FAIL missing output: %s\n", p.string().c_str());
    ++g_failures;
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: cli_smoke <wfbench-binary>\n");
    return 2;
  }
  g_binary = argv[1];
  g_dir = fs::temp_directory_path() / "wfbench_smoke";
  fs::remove_all(g_dir);
  fs::create_directories(g_dir);
  const auto start = std::chrono::steady_clock::now();

  const std::string data = (g_dir / "data").string();
  step("gen-dataset", "gen-dataset --sites 32 --traces 20 --seed 7 --out " + data);
  expect_file(fs::path(data) / "s0000" / "0.csv");

  const std::string cand = (g_dir / "candidates.csv").string();
  step("candidates", "candidates --data " + data + " --m 10 --out " + cand);
  expect_file(cand);

  const std::string clust = (g_dir / "clustering.txt").string();
  step("cluster", "cluster --data " + data + " --algo pam --k 10 --seed 3 --out " + clust);
  expect_file(clust);

  const std::string idx = (g_dir / "indexes.csv").string();
  step("indexes", "indexes --data " + data + " --algos pam --k-list 10 --out " + idx);
  expect_file(idx);

  const std::string src = (fs::path(data) / "s0000" / "0.csv").string();
  const std::string defended = (g_dir / "defended.csv").string();
  step("apply-defense buflo", "apply-defense --defense buflo --tau 1000 --rho 20 --d-bytes 1000 --in " +
                                  src + " --out " + defended);
  expect_file(defended);
  step("apply-defense tgpsm", "apply-defense --defense tgpsm --d 3 --data " + data +
                                  " --site s0000 --seed 5 --in " + src + " --out " + defended);
  expect_file(defended);

  const std::string cfg_path = (g_dir / "exp.cfg").string();
  {
    std::ofstream cfg(cfg_path);
    cfg << "dataset = " << data << "\nk = 8\nt_train = 8\nt_test = 2\ntrials = 2\n"
        << "classifier = ll\nseed = 5\ndefense = tgpsm\n[tgpsm]\nd = 1,3\nn_clusters = 5\n";
  }
  const std::string results = (g_dir / "results.csv").string();
  const std::string trend = (g_dir / "trend.csv").string();
  step("run", "run --config " + cfg_path + " --out " + results + " --trend " + trend);
  expect_file(results);
  expect_file(trend);

  const std::string trend2 = (g_dir / "trend2.csv").string();
  step("report", "report --in " + results + " --out " + trend2);
  expect_file(trend2);

  step("usage error exits 1", "cluster --bogus", 1);
  step("data error exits 2", "candidates --data /nonexistent --out " + cand, 2);

  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("smoke finished in %.1fs\n", secs);
  if (secs >= 60.0) {
    std::printf("FAIL smoke exceeded 60 s\n");
    ++g_failures;
  }
  if (g_failures == 0) fs::remove_all(g_dir);
  return g_failures == 0 ? 0 : 1;
}
