// Writes the synthetic corpora under an output directory (default
// data/fixture): retriever articles, dialog articles and dialog splits.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lexki/fixture/synthetic.hpp"

namespace {

void write_articles(const std::filesystem::path& path, const std::vector<lexki::fixture::Article>& articles) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& a : articles) {
    nlohmann::ordered_json j;
    j["title"] = a.title;
    j["text"] = a.text;
    out << j.dump() << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic fixture corpora"};
  std::string out_dir = LEXKI_DATA_DIR "/fixture";
  std::size_t articles = 500;
  std::uint64_t retriever_seed = 1;
  lexki::fixture::DialogFixtureConfig cfg;
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--retriever-articles", articles, "articles in the retriever knowledge base");
  app.add_option("--retriever-seed", retriever_seed);
  app.add_option("--entities", cfg.entities);
  app.add_option("--attributes", cfg.attributes);
  app.add_option("--train", cfg.train_pairs);
  app.add_option("--valid", cfg.valid_pairs);
  app.add_option("--test", cfg.test_pairs);
  app.add_option("--safe-fraction", cfg.safe_fraction);
  app.add_option("--seed", cfg.seed, "dialog fixture seed");
  CLI11_PARSE(app, argc, argv);

  try {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_articles(dir / "retriever_articles.jsonl", lexki::fixture::retriever_articles(articles, retriever_seed));
    const auto fx = lexki::fixture::dialog_fixture(cfg);
    write_articles(dir / "dialog_articles.jsonl", fx.articles);
    lexki::corpus::save_dialog_corpus((dir / "dialog_train.jsonl").string(), fx.train);
    lexki::corpus::save_dialog_corpus((dir / "dialog_valid.jsonl").string(), fx.valid);
    lexki::corpus::save_dialog_corpus((dir / "dialog_test.jsonl").string(), fx.test);
    std::cout << "wrote fixture to " << out_dir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
