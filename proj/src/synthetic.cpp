#include "kgdial/synthetic.hpp"

#include <algorithm>
#include <array>
#include <random>
#include <string>
#include <vector>

namespace kgdial {

namespace {

using Rng = std::mt19937_64;

const std::vector<std::string> kTopics = {
    "Inception",     "Inception 2",  "Silent Harbor", "Red River",    "Red River Valley",
    "Blue Lantern",  "Iron Garden",  "Paper Moon",    "Night Train",  "Glass Tiger",
    "Autumn Road",   "Winter Palace", "Golden Field", "Stone Bridge", "Crimson Sky",
    "Quiet Storm",   "Lost Island",  "Echo Park",     "Silver Arrow", "Deep Forest"};

const std::vector<std::string> kFirst = {"Ava",  "Liam", "Noah", "Mia",  "Ethan", "Zoe",  "Owen",
                                         "Ivy",  "Lucas", "Nora", "Felix", "Ruby", "Hugo", "Clara"};
const std::vector<std::string> kLast = {"Stone", "Hart",  "Vale", "Brook", "Marsh", "Frost", "Reed",
                                        "Lowe",  "Quinn", "Shaw", "Blake", "Moss",  "Price", "Wren"};
const std::vector<std::string> kGenres = {"drama",   "comedy",   "thriller", "western",
                                          "mystery", "romance",  "horror",   "musical"};
const std::vector<std::string> kCountries = {"France", "Japan", "Canada", "Brazil",
                                             "Italy",  "Korea", "Mexico", "Norway"};
const std::vector<std::string> kLanguages = {"English", "French", "Japanese", "Spanish",
                                             "Italian", "Korean", "German",   "Hindi"};

struct RelationText {
  const char* relation;
  std::array<const char*, 2> questions;  // {T} marks the title
  const char* answer;                    // {T} title, {Y} tail
};

const std::vector<RelationText> kRelations = {
    {"director", {"Who directed {T} ?", "Do you know the director of {T} ?"}, "{T} was directed by {Y} ."},
    {"genre", {"What genre is {T} ?", "What kind of film is {T} ?"}, "{T} is a {Y} film ."},
    {"year", {"When did {T} come out ?", "What year was {T} released ?"}, "{T} came out in {Y} ."},
    {"star", {"Who stars in {T} ?", "Who is the lead actor of {T} ?"}, "{Y} stars in {T} ."},
    {"country", {"Where was {T} made ?", "Which country made {T} ?"}, "{T} was made in {Y} ."},
    {"language", {"What language is {T} in ?", "Which language does {T} use ?"}, "{T} is in {Y} ."},
    {"related", {"Any films similar to {T} ?", "What is related to {T} ?"}, "If you like {T} , try {Y} ."},
};

std::string fill(std::string s, const std::string& title, const std::string& tail) {
  for (auto [key, value] : {std::pair<std::string, const std::string*>{"{T}", &title}, {"{Y}", &tail}}) {
    for (std::size_t p = s.find(key); p != std::string::npos; p = s.find(key, p + value->size()))
      s.replace(p, key.size(), *value);
  }
  return s;
}

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

KnowledgeGraph make_graph(Rng& rng) {
  std::vector<TopicRecord> records;
  for (std::size_t i = 0; i < kTopics.size(); ++i) {
    const auto& t = kTopics[i];
    TopicRecord r{t, {}};
    std::size_t related = pick(rng, kTopics.size() - 1);
    if (related >= i) ++related;
    const std::string tails[] = {
        kFirst[pick(rng, kFirst.size())] + " " + kLast[pick(rng, kLast.size())],
        kGenres[pick(rng, kGenres.size())],
        std::to_string(1960 + pick(rng, 60)),
        kFirst[pick(rng, kFirst.size())] + " " + kLast[pick(rng, kLast.size())],
        kCountries[pick(rng, kCountries.size())],
        kLanguages[pick(rng, kLanguages.size())],
        kTopics[related]};
    for (std::size_t k = 0; k < kRelations.size(); ++k) r.kb.push_back({t, kRelations[k].relation, tails[k]});
    records.push_back(std::move(r));
  }
  return KnowledgeGraph::from_records(std::move(records));
}

Dialogue make_dialogue(const KnowledgeGraph& graph, Rng& rng, const SyntheticOptions& opts,
                       std::size_t index) {
  Dialogue d;
  d.name = "dialogue-" + std::to_string(index);
  std::string topic = kTopics[pick(rng, kTopics.size())];
  const std::size_t questions = 4 + pick(rng, 3);
  const bool switches = chance(rng, opts.switch_probability);
  const std::size_t switch_at = 2 + pick(rng, questions - 2);
  std::vector<std::size_t> asked;
  bool fresh = true;
  for (std::size_t q = 0; q < questions; ++q) {
    if (switches && q == switch_at) {
      // Half of the switches follow the "related" link.
      const auto& kb = graph.triples_of(topic);
      std::string next = graph.triples()[kb.back()].tail;
      if (!chance(rng, 0.5)) {
        do next = kTopics[pick(rng, kTopics.size())]; while (next == topic);
      }
      topic = next;
      asked.clear();
      fresh = true;
    }
    std::size_t rel;
    do rel = pick(rng, kRelations.size());
    while (std::find(asked.begin(), asked.end(), rel) != asked.end());
    asked.push_back(rel);
    const auto& rt = kRelations[rel];
    const bool pronoun = !fresh && chance(rng, opts.pronoun_probability);
    d.messages.push_back({fill(rt.questions[pick(rng, 2)], pronoun ? "it" : topic, ""), {}});
    const auto& triple = graph.triples()[graph.triples_of(topic)[rel]];
    d.messages.push_back({fill(rt.answer, topic, triple.tail), {triple}});
    fresh = false;
  }
  return d;
}

}  // namespace

void SyntheticCorpus::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  graph.save(dir / "graph.json");
  save_corpus(train, dir / "train.json");
  save_corpus(dev, dir / "dev.json");
  save_corpus(test, dir / "test.json");
}

SyntheticCorpus SyntheticCorpus::load(const std::filesystem::path& dir) {
  return {KnowledgeGraph::load(dir / "graph.json"), load_corpus(dir / "train.json"),
          load_corpus(dir / "dev.json"), load_corpus(dir / "test.json")};
}

SyntheticCorpus make_synthetic(const SyntheticOptions& opts) {
  Rng rng(opts.seed);
  SyntheticCorpus c;
  c.graph = make_graph(rng);
  std::size_t index = 0;
  for (auto [split, count] : {std::pair{&c.train, opts.train_dialogues},
                              {&c.dev, opts.dev_dialogues},
                              {&c.test, opts.test_dialogues}})
    for (std::size_t i = 0; i < count; ++i) split->push_back(make_dialogue(c.graph, rng, opts, index++));
  return c;
}

}  // namespace kgdial
