#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <string>

#include "test_util.hpp"

namespace {

struct CliRun {
  int status = -1;
  std::string output;
};

CliRun run(const std::string& args) {
  CliRun r;
  const std::string cmd = std::string(WECLICK_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

void expect_one_line_error(const CliRun& r) {
  EXPECT_NE(r.status, 0);
  ASSERT_FALSE(r.output.empty());
  EXPECT_EQ(r.output.rfind("error: ", 0), 0u) << r.output;
  EXPECT_EQ(r.output.find('\n'), r.output.size() - 1) << r.output;
}

}  // namespace

TEST(Cli, MissingCorpusIsOneLineError) {
  expect_one_line_error(run("eval --corpus /nonexistent/corpus --checkpoint /nonexistent/ckpt"));
}

TEST(Cli, UnknownConfigKeyRejected) {
  const auto dir = test::fresh_dir("cli_cfg");
  ASSERT_EQ(run("gen-data --out " + (dir / "c").string() + " --clips 6 --height 32 --width 32").status, 0);
  ASSERT_EQ(run("gen-clicks --corpus " + (dir / "c").string()).status, 0);
  const CliRun r = run("train-teacher --corpus " + (dir / "c").string() + " --out " + (dir / "t").string() +
                    " --set no_such_key=1");
  expect_one_line_error(r);
  EXPECT_NE(r.output.find("no_such_key"), std::string::npos);
}

TEST(Cli, BadArgumentsExitNonZero) {
  expect_one_line_error(run("gen-data --clips notanumber --out /tmp/x"));
  expect_one_line_error(run(""));
}

TEST(Cli, InferRejectsTeacherCheckpoint) {
  const auto dir = test::fresh_dir("cli_infer");
  ASSERT_EQ(run("gen-data --out " + (dir / "c").string() + " --clips 6 --height 32 --width 32").status, 0);
  ASSERT_EQ(run("gen-clicks --corpus " + (dir / "c").string()).status, 0);
  ASSERT_EQ(run("train-teacher --corpus " + (dir / "c").string() + " --out " + (dir / "t").string() +
                " --set teacher_epochs=1 --set teacher_channels=4")
                .status,
            0);
  const std::string frame = (dir / "c").string() + "/clips/clip_0000/frame_000.wct";
  const CliRun r = run("infer --checkpoint " + (dir / "t").string() + " --frame " + frame + " --out " +
                    (dir / "p.wct").string());
  expect_one_line_error(r);
}
