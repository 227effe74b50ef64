// Synthesize a fixed feature-extractor weight file (VGG-19 topology). See
// lmk/vgg.hpp for the file format; converted classifier weights use the same
// layout.

#include <CLI11.hpp>

#include <iostream>

#include "lmk/vgg.hpp"

int main(int argc, char** argv) {
  CLI::App app{"write a feature-extractor weight file"};
  std::string out, preset = "vgg19-slim";
  uint64_t seed = 0;
  app.add_option("--out", out, "output path")->required();
  app.add_option("--preset", preset, "vgg19 | vgg19-slim");
  app.add_option("--seed", seed, "filter seed");
  CLI11_PARSE(app, argc, argv);
  try {
    lmk::VggPreset p;
    if (preset == "vgg19") p = lmk::VggPreset::vgg19;
    else if (preset == "vgg19-slim") p = lmk::VggPreset::vgg19_slim;
    else throw std::runtime_error("--preset must be vgg19 or vgg19-slim");
    lmk::write_vgg_weights(out, p, seed);
    std::cout << "wrote " << preset << " weights to " << out << std::endl;
  } catch (const std::exception& e) {
    std::cerr << "lmkadapt-make-vgg: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
