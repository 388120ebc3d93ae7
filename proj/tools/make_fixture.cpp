// Writes the synthetic corpus used by the end-to-end tests: 1,000 records in
// five planted topics, Gaussian embeddings around one center per topic, and a
// handful of lines each filter should reject.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus_atlas/embedstore.hpp"
#include "corpus_atlas/io.hpp"
#include "corpus_atlas/random.hpp"

namespace ca = corpus_atlas;

namespace {

constexpr std::size_t kPerTopic = 200;
constexpr std::size_t kDim = 64;
constexpr std::uint64_t kSeed = 20231101;

struct Topic {
  std::string category;
  std::vector<std::string> vocabulary;
};

const std::array<Topic, 5>& topics() {
  static const std::array<Topic, 5> t{{
      {"hep-ph",
       {"quark", "gluon", "collider", "boson", "lepton", "hadron", "neutrino", "decay", "scattering", "cross",
        "section", "luminosity", "jets", "parton", "higgs", "flavor", "anomaly", "loop", "resonance", "detector"}},
      {"math.ST",
       {"estimator", "asymptotic", "consistency", "minimax", "likelihood", "posterior", "bootstrap", "variance",
        "regression", "quantile", "theorem", "bound", "convergence", "kernel", "sample", "hypothesis", "test",
        "density", "risk", "inference"}},
      {"cs.CV",
       {"image", "segmentation", "convolutional", "detection", "pixel", "camera", "video", "pose", "object",
        "recognition", "dataset", "benchmark", "attention", "backbone", "feature", "depth", "scene", "tracking",
        "annotation", "augmentation"}},
      {"cond-mat.mtrl-sci",
       {"lattice", "crystal", "alloy", "phonon", "band", "gap", "defect", "thin", "film", "oxide", "magnetic",
        "dielectric", "strain", "grain", "diffraction", "synthesis", "doping", "interface", "perovskite", "density"}},
      {"q-bio.NC",
       {"neuron", "cortex", "spike", "synaptic", "plasticity", "firing", "network", "brain", "hippocampus",
        "oscillation", "stimulus", "decoding", "neural", "dendrite", "memory", "circuit", "behavior", "recording",
        "visual", "motor"}},
  }};
  return t;
}

const std::vector<std::string>& filler() {
  static const std::vector<std::string> words{"we", "the", "of", "a", "and", "in", "study", "propose", "show",
                                              "results", "method", "model", "new", "approach", "analysis", "that",
                                              "this", "for", "with", "using"};
  return words;
}

std::string abstract_for(const Topic& topic, std::size_t words, ca::Rng& rng) {
  std::string out;
  for (std::size_t w = 0; w < words; ++w) {
    const auto& pool = rng.uniform() < 0.6 ? topic.vocabulary : filler();
    if (!out.empty()) out += ' ';
    out += pool[rng.index(pool.size())];
  }
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out + ".";
}

std::string record_line(const std::string& id, const std::string& abstract, const std::string& categories) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["abstract"] = abstract;
  j["categories"] = categories;
  return j.dump() + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "tests/fixtures/synthetic";
  ca::Rng rng(kSeed);

  std::vector<std::vector<double>> centers(topics().size(), std::vector<double>(kDim));
  for (auto& c : centers) {
    for (double& v : c) v = 4.0 * rng.normal();
  }

  std::vector<std::size_t> order(kPerTopic * topics().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i % topics().size();
  ca::shuffle(order, rng);

  std::string jsonl;
  ca::embedstore::EmbeddingMatrix emb;
  emb.variant = "synthetic";
  emb.values = ca::Matrix<float>(order.size(), kDim);
  std::size_t hist_ph = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Topic& topic = topics()[order[i]];
    const std::string id = "2301." + std::string(i < 9 ? "0000" : i < 99 ? "000" : i < 999 ? "00" : "0") +
                           std::to_string(i + 1);
    std::string categories = topic.category;
    if (rng.uniform() < 0.15) categories += " stat.ML";
    if (hist_ph < 8 && i % 97 == 5) {
      categories += " physics.hist-ph";
      ++hist_ph;
    }
    const std::size_t words = 40 + rng.index(160);
    if (i % 250 == 17) {
      // An earlier, superseded version of this record; the later line wins.
      jsonl += record_line(id, abstract_for(topics()[(order[i] + 1) % topics().size()], words, rng),
                           topics()[(order[i] + 1) % topics().size()].category);
    }
    jsonl += record_line(id, abstract_for(topic, words, rng), categories);

    emb.ids.push_back(id);
    for (std::size_t c = 0; c < kDim; ++c) {
      emb.values(i, c) = static_cast<float>(centers[order[i]][c] + rng.normal());
    }

    if (i % 200 == 50) {
      jsonl += record_line("bait.short." + std::to_string(i), "Too short to keep.", topic.category);
    }
    if (i % 200 == 120) {
      jsonl += record_line("bait.withdrawn." + std::to_string(i),
                           "This paper has been withdrawn by the author due to an error in the main proof, "
                           "which invalidates the conclusions drawn in sections three and four; a corrected "
                           "treatment will appear in a separate submission together with additional numerical "
                           "experiments and a detailed discussion of the remaining open problems in this area.",
                           topic.category);
    }
    if (i % 333 == 200) jsonl += "{\"id\": \"bait.malformed\", \"abstract\": \n";
  }

  ca::io::write_file(dir / "records.jsonl", jsonl);
  ca::embedstore::write_embeddings(emb, dir / "embeddings.emb1");

  ca::io::write_file(dir / "labels.csv", [&] {
    std::string out = "id,topic\n";
    for (std::size_t i = 0; i < order.size(); ++i) out += emb.ids[i] + "," + std::to_string(order[i]) + "\n";
    return out;
  }());

  ca::io::write_file(dir / "pipeline.toml",
                     "# Synthetic five-topic fixture.\n"
                     "[input]\n"
                     "corpus = \"records.jsonl\"\n"
                     "embeddings = [\"embeddings.emb1\"]\n"
                     "\n"
                     "[filter]\n"
                     "min_words = 31\n"
                     "min_category_count = 50\n"
                     "\n"
                     "[split]\n"
                     "seed = 0\n"
                     "\n"
                     "[pca]\n"
                     "target = 0.95\n"
                     "fit_on = \"train\"\n"
                     "\n"
                     "[sweep]\n"
                     "kmin = 2\n"
                     "kmax = 15\n"
                     "seed = 0\n"
                     "n_init = 10\n"
                     "\n"
                     "[report]\n"
                     "top = 3\n"
                     "min_count = 10\n"
                     "on = \"test\"\n"
                     "\n"
                     "[output]\n"
                     "dir = \"atlas-out\"\n");
  std::cout << "wrote " << order.size() << " records to " << dir.string() << "\n";
  return 0;
}
