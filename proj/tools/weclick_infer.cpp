// Deployment binary: single-frame student inference. Links the inference
// library only.
#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "weclick/inference.hpp"

int main(int argc, char** argv) {
  CLI::App app{"weclick-infer: per-frame class map from a student checkpoint"};
  std::string checkpoint, frame, out;
  app.add_option("--checkpoint", checkpoint)->required();
  app.add_option("--frame", frame, "WCT1 frame (1, 3, H, W)")->required();
  app.add_option("--out", out, "WCT1 class map (H, W)")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  try {
    const auto pred = weclick::infer_file(checkpoint, frame, out);
    std::printf("wrote %zux%zu class map to %s\n", pred.height, pred.width, out.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
