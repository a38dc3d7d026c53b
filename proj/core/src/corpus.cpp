#include "reasonq/corpus.hpp"

#include "reasonq/canonical_json.hpp"
#include "reasonq/error.hpp"
#include "reasonq/rng.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace reasonq {
namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

[[noreturn]] void line_error(const std::string& name, int line, const std::string& what) {
  throw Error(ErrorKind::Parse, name + ":" + std::to_string(line) + ": " + what);
}

std::string required_string(const Json& rec, const char* key, const std::string& name, int line) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) line_error(name, line, std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

std::vector<std::string> string_array(const Json& rec, const char* key, const std::string& name, int line) {
  std::vector<std::string> out;
  auto it = rec.find(key);
  if (it == rec.end()) return out;
  if (!it->is_array()) line_error(name, line, std::string("'") + key + "' must be an array of strings");
  for (const auto& v : *it) {
    if (!v.is_string()) line_error(name, line, std::string("'") + key + "' must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

EvalInstance parse_record(const Json& rec, const std::string& name, int line) {
  if (!rec.is_object()) line_error(name, line, "record is not a JSON object");
  EvalInstance inst;
  inst.id = required_string(rec, "id", name, line);
  inst.prompt = required_string(rec, "prompt", name, line);
  std::string kind_name = required_string(rec, "task_kind", name, line);
  auto kind = parse_task_kind(kind_name);
  if (!kind) line_error(name, line, "unknown task_kind '" + kind_name + "'");
  inst.task_kind = *kind;
  inst.dataset = rec.contains("dataset") ? required_string(rec, "dataset", name, line) : name;
  if (auto conventional = dataset_task_kind(inst.dataset); conventional && *conventional != inst.task_kind) {
    line_error(name, line, "dataset '" + inst.dataset + "' requires task_kind " + to_string(*conventional));
  }
  std::string raw_gold = required_string(rec, "gold", name, line);
  inst.gold = canonical_gold(raw_gold, inst.task_kind);
  if (inst.gold.empty()) line_error(name, line, "gold answer is empty after normalization");
  if (inst.id.empty()) line_error(name, line, "empty id");
  if (inst.prompt.empty()) line_error(name, line, "empty prompt");
  if (rec.contains("subject") && !rec["subject"].is_null()) inst.subject = required_string(rec, "subject", name, line);
  inst.perturbations = string_array(rec, "perturbations", name, line);
  inst.paraphrases = string_array(rec, "paraphrases", name, line);
  if (auto it = rec.find("degenerate_variants"); it != rec.end()) {
    if (!it->is_array()) line_error(name, line, "'degenerate_variants' must be an array of indices");
    for (const auto& v : *it) {
      if (!v.is_number_unsigned() || v.get<std::size_t>() >= inst.perturbations.size()) {
        line_error(name, line, "'degenerate_variants' holds an invalid index");
      }
      inst.degenerate_variants.push_back(v.get<std::size_t>());
    }
  }
  for (std::size_t i = 0; i < inst.perturbations.size(); ++i) {
    bool flagged = std::find(inst.degenerate_variants.begin(), inst.degenerate_variants.end(), i) !=
                   inst.degenerate_variants.end();
    if (!flagged && inst.perturbations[i] == inst.prompt) {
      line_error(name, line, "perturbation " + std::to_string(i) + " is identical to the prompt");
    }
  }
  if (auto it = rec.find("meta"); it != rec.end()) {
    if (!it->is_object()) line_error(name, line, "'meta' must be an object of strings");
    for (auto m = it->begin(); m != it->end(); ++m) {
      if (!m.value().is_string()) line_error(name, line, "'meta' must be an object of strings");
      inst.meta.emplace(m.key(), m.value().get<std::string>());
    }
  }
  return inst;
}

Json to_json(const EvalInstance& inst) {
  Json rec = Json::object();
  rec["id"] = inst.id;
  rec["prompt"] = inst.prompt;
  rec["gold"] = inst.gold;
  rec["task_kind"] = to_string(inst.task_kind);
  rec["dataset"] = inst.dataset;
  if (inst.subject) rec["subject"] = *inst.subject;
  if (!inst.perturbations.empty()) rec["perturbations"] = inst.perturbations;
  if (!inst.degenerate_variants.empty()) rec["degenerate_variants"] = inst.degenerate_variants;
  if (!inst.paraphrases.empty()) rec["paraphrases"] = inst.paraphrases;
  if (!inst.meta.empty()) rec["meta"] = inst.meta;
  return rec;
}

}  // namespace

std::optional<TaskKind> dataset_task_kind(std::string_view dataset) {
  std::string d = lower_ascii(dataset);
  if (d == "gsm8k") return TaskKind::Numeric;
  if (d == "mmlu") return TaskKind::MultipleChoice;
  if (d == "strategyqa") return TaskKind::Boolean;
  return std::nullopt;
}

void validate(const Corpus& corpus) {
  if (corpus.instances.empty()) throw Error(ErrorKind::Validation, "corpus '" + corpus.name + "' is empty");
  std::set<std::string_view> ids;
  for (const auto& inst : corpus.instances) {
    if (!ids.insert(inst.id).second) {
      throw Error(ErrorKind::Validation, "duplicate instance id '" + inst.id + "' in corpus '" + corpus.name + "'");
    }
    if (inst.gold.empty()) throw Error(ErrorKind::Validation, "instance '" + inst.id + "' has an empty gold answer");
    if (inst.perturbations.size() != corpus.p_count) {
      throw Error(ErrorKind::Validation, "instance '" + inst.id + "' has " + std::to_string(inst.perturbations.size()) +
                                             " perturbations, corpus expects " + std::to_string(corpus.p_count));
    }
  }
}

Corpus parse_corpus(std::string_view jsonl, std::string name) {
  Corpus corpus;
  corpus.name = std::move(name);
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int line_no = 0;
  std::set<std::string> ids;
  std::optional<std::size_t> p_count;
  int first_p_line = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json rec = Json::parse(line, nullptr, false);
    if (rec.is_discarded()) line_error(corpus.name, line_no, "malformed JSON");
    EvalInstance inst = parse_record(rec, corpus.name, line_no);
    if (!ids.insert(inst.id).second) line_error(corpus.name, line_no, "duplicate id '" + inst.id + "'");
    if (!p_count) {
      p_count = inst.perturbations.size();
      first_p_line = line_no;
    } else if (*p_count != inst.perturbations.size()) {
      line_error(corpus.name, line_no,
                 "mixed perturbation counts: " + std::to_string(inst.perturbations.size()) + " here, " +
                     std::to_string(*p_count) + " on line " + std::to_string(first_p_line));
    }
    corpus.instances.push_back(std::move(inst));
  }
  corpus.p_count = p_count.value_or(0);
  corpus.perturbation_source = corpus.p_count > 0 ? "inline" : "none";
  validate(corpus);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::Io, "corpus file not found: " + path.string());
  return parse_corpus(read_file(path), path.stem().string());
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& inst : corpus.instances) {
    out += canonical_dump(to_json(inst));
    out.push_back('\n');
  }
  return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << serialize_corpus(corpus);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Synthetic dataset

namespace {

constexpr std::array<std::string_view, 12> kNames{"Tom", "Maria", "Ken", "Aisha", "Luis", "Priya",
                                                  "Omar", "Lena", "Sam", "Nora", "Ivan", "Mei"};
constexpr std::array<std::string_view, 8> kItems{"apples", "marbles", "pencils", "stickers",
                                                 "cookies", "stamps", "books", "shells"};
constexpr std::array<std::string_view, 6> kColors{"red", "blue", "green", "yellow", "white", "black"};
constexpr std::array<std::string_view, 6> kObjects{"box", "ball", "cup", "chair", "lamp", "kite"};
constexpr std::array<std::string_view, 6> kPlaces{"room", "garage", "kitchen", "attic", "shed", "hall"};

template <std::size_t N>
std::string pick(SplitMix64& rng, const std::array<std::string_view, N>& pool) {
  return std::string(pool[rng.below(N)]);
}

std::string num(std::int64_t v) { return std::to_string(v); }

std::string seq_id(std::string_view prefix, std::size_t i) {
  std::string n = std::to_string(i + 1);
  while (n.size() < 4) n.insert(n.begin(), '0');
  return std::string(prefix) + n;
}

EvalInstance arithmetic_item(SplitMix64& rng, std::size_t index) {
  EvalInstance inst;
  inst.id = seq_id("syn-arith-", index);
  inst.task_kind = TaskKind::Numeric;
  inst.dataset = "synthetic";
  inst.subject = "arithmetic";
  const std::string name = pick(rng, kNames);
  const std::string items = pick(rng, kItems);
  std::int64_t answer = 0;
  switch (rng.below(5)) {
    case 0: {
      auto a = rng.between(3, 60), b = rng.between(2, 40);
      inst.prompt = name + " has " + num(a) + " " + items + " and buys " + num(b) + " more. How many " + items +
                    " does " + name + " have now?";
      inst.meta["expr"] = num(a) + " + " + num(b);
      answer = a + b;
      break;
    }
    case 1: {
      auto a = rng.between(10, 90), b = rng.between(1, a - 1);
      inst.prompt = name + " had " + num(a) + " " + items + " and gave " + num(b) + " of them to a friend. How many " +
                    items + " are left?";
      inst.meta["expr"] = num(a) + " - " + num(b);
      answer = a - b;
      break;
    }
    case 2: {
      auto a = rng.between(2, 12), b = rng.between(2, 15);
      inst.prompt = "A shop packs " + items + " into boxes of " + num(b) + ". It fills " + num(a) +
                    " boxes. How many " + items + " are packed in total?";
      inst.meta["expr"] = num(a) + " * " + num(b);
      answer = a * b;
      break;
    }
    case 3: {
      auto a = rng.between(2, 12), b = rng.between(2, 9);
      inst.prompt = name + " shares " + num(a * b) + " " + items + " equally among " + num(b) +
                    " friends. How many " + items + " does each friend get?";
      inst.meta["expr"] = num(a * b) + " / " + num(b);
      answer = a;
      break;
    }
    default: {
      auto a = rng.between(2, 6), b = rng.between(2, 9);
      auto bill = (a * b < 20) ? 20 : (a * b < 50 ? 50 : 100);
      inst.prompt = name + " buys " + num(a) + " notebooks at " + num(b) + " dollars each and pays with a " +
                    num(bill) + "-dollar bill. How much change does " + name + " get, in dollars?";
      inst.meta["expr"] = num(bill) + " - " + num(a) + " * " + num(b);
      answer = bill - a * b;
      break;
    }
  }
  inst.gold = num(answer);
  return inst;
}

EvalInstance adversarial_item(SplitMix64& rng, std::size_t index) {
  EvalInstance inst;
  inst.id = seq_id("syn-adv-", index);
  inst.task_kind = TaskKind::Freeform;
  inst.dataset = "synthetic";
  inst.subject = "adversarial";
  const std::string name = pick(rng, kNames);
  std::string body;
  switch (rng.below(4)) {
    case 0: {
      const std::string items = pick(rng, kItems);
      auto a = rng.between(2, 30);
      auto b = a + rng.between(1, 10);
      body = name + " has exactly " + num(a) + " " + items + ". " + name + " also has exactly " + num(b) + " " +
             items + ". How many " + items + " does " + name + " have?";
      break;
    }
    case 1: {
      const std::string obj = pick(rng, kObjects), color = pick(rng, kColors), place = pick(rng, kPlaces);
      body = "Every " + obj + " in the " + place + " is " + color + ". The " + obj + " by the door is in the " +
             place + " and is not " + color + ". What color is the " + obj + " by the door?";
      break;
    }
    case 2: {
      std::string other = pick(rng, kNames);
      if (other == name) other = name == "Tom" ? "Sam" : "Tom";
      body = name + " is older than " + other + ". " + other + " is older than " + name + ". Who is older?";
      break;
    }
    default: {
      auto h = rng.between(1, 6), d = rng.between(2, 4);
      body = "A train left at " + num(h) + " o'clock and travelled for exactly " + num(d) + " hours. It arrived at " +
             num(h + d + rng.between(1, 3)) + " o'clock the same day. At what time did it arrive?";
      break;
    }
  }
  inst.prompt = body + " If the premises contradict each other, answer \"contradiction\".";
  inst.gold = std::string(kContradictionGold);
  return inst;
}

EvalInstance robustness_item(SplitMix64& rng, std::size_t index) {
  EvalInstance inst;
  inst.id = seq_id("syn-rob-", index);
  inst.dataset = "synthetic";
  inst.subject = "robustness";
  auto a = rng.between(11, 99), b = rng.between(2, 60);
  switch (rng.below(3)) {
    case 0:
      inst.task_kind = TaskKind::Numeric;
      inst.prompt = "What is " + num(a) + " plus " + num(b) + "?";
      inst.paraphrases = {"Compute the sum of " + num(a) + " and " + num(b) + ".",
                          "If you add " + num(b) + " to " + num(a) + ", what do you get?"};
      inst.meta["expr"] = num(a) + " + " + num(b);
      inst.gold = num(a + b);
      break;
    case 1:
      inst.task_kind = TaskKind::Numeric;
      inst.prompt = "What is " + num(a) + " times " + num(b) + "?";
      inst.paraphrases = {"Compute the product of " + num(a) + " and " + num(b) + ".",
                          "If you multiply " + num(a) + " by " + num(b) + ", what do you get?"};
      inst.meta["expr"] = num(a) + " * " + num(b);
      inst.gold = num(a * b);
      break;
    default: {
      if (a == b) ++a;
      inst.task_kind = TaskKind::Boolean;
      inst.prompt = "Is " + num(a) + " greater than " + num(b) + "? Answer yes or no.";
      inst.paraphrases = {"Is " + num(b) + " less than " + num(a) + "? Answer yes or no.",
                          "Does " + num(a) + " exceed " + num(b) + "? Answer yes or no."};
      inst.gold = a > b ? "yes" : "no";
      break;
    }
  }
  return inst;
}

}  // namespace

Corpus generate_synthetic(const SyntheticSpec& spec) {
  Corpus corpus;
  corpus.name = "synthetic";
  // Separate streams per family so changing one count leaves the others intact.
  SplitMix64 arith(derive_seed(spec.seed, 1));
  SplitMix64 adv(derive_seed(spec.seed, 2));
  SplitMix64 rob(derive_seed(spec.seed, 3));
  for (std::size_t i = 0; i < spec.n_arithmetic; ++i) corpus.instances.push_back(arithmetic_item(arith, i));
  for (std::size_t i = 0; i < spec.n_adversarial; ++i) corpus.instances.push_back(adversarial_item(adv, i));
  for (std::size_t i = 0; i < spec.n_robustness; ++i) corpus.instances.push_back(robustness_item(rob, i));
  validate(corpus);
  return corpus;
}

// ---------------------------------------------------------------------------

Corpus attach_perturbations(Corpus corpus, const PerturbationSource& source) {
  if (const auto* file = std::get_if<VariantFileSource>(&source)) {
    std::map<std::string, std::vector<std::string>> variants;
    std::istringstream in(read_file(file->path));
    std::string line;
    int line_no = 0;
    std::optional<std::size_t> p;
    const std::string name = file->path.filename().string();
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      Json rec = Json::parse(line, nullptr, false);
      if (rec.is_discarded() || !rec.is_object()) line_error(name, line_no, "malformed JSON");
      std::string id = required_string(rec, "id", name, line_no);
      auto list = string_array(rec, "variants", name, line_no);
      if (list.empty()) line_error(name, line_no, "'variants' must be a non-empty array");
      if (p && *p != list.size()) line_error(name, line_no, "variant count differs from earlier lines");
      p = list.size();
      if (!variants.emplace(id, std::move(list)).second) line_error(name, line_no, "duplicate id '" + id + "'");
    }
    std::vector<std::string> missing;
    for (const auto& inst : corpus.instances) {
      if (!variants.contains(inst.id)) missing.push_back(inst.id);
    }
    if (!missing.empty()) {
      std::string list;
      for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
      throw Error(ErrorKind::Validation, "variant file " + name + " does not cover: " + list);
    }
    for (auto& inst : corpus.instances) {
      inst.perturbations = variants.at(inst.id);
      inst.degenerate_variants.clear();
      for (std::size_t i = 0; i < inst.perturbations.size(); ++i) {
        if (inst.perturbations[i] == inst.prompt) inst.degenerate_variants.push_back(i);
      }
    }
    corpus.p_count = p.value_or(0);
    corpus.perturbation_source = "file:" + name;
  } else {
    const auto& base = std::get<BaselineSource>(source);
    if (base.p == 0) throw Error(ErrorKind::Validation, "baseline perturbation count must be >= 1");
    for (auto& inst : corpus.instances) {
      inst.perturbations.clear();
      inst.degenerate_variants.clear();
      const std::size_t own = std::min(inst.paraphrases.size(), base.p);
      inst.perturbations.assign(inst.paraphrases.begin(), inst.paraphrases.begin() + static_cast<std::ptrdiff_t>(own));
      if (own < base.p) {
        for (auto& v : perturb_baseline(inst.prompt, base.p - own, base.seed)) {
          if (v.degenerate) inst.degenerate_variants.push_back(inst.perturbations.size());
          inst.perturbations.push_back(std::move(v.text));
        }
      }
    }
    corpus.p_count = base.p;
    corpus.perturbation_source = "baseline:seed=" + std::to_string(base.seed);
  }
  validate(corpus);
  return corpus;
}

}  // namespace reasonq
