// Copyright 2026 The PoisonForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "poisonforge/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "poisonforge/error.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/text.hpp"

namespace poisonforge {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

class TomlParser {
 public:
  TomlParser(std::string_view src, const EnvLookup& env) : src_(src), env_(env) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = parse_header(root);
      } else {
        parse_key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  bool eof() const { return pos_ >= src_.size(); }
  char peek() const { return eof() ? '\0' : src_[pos_]; }
  char get() {
    char c = src_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') get();
      else break;
    }
  }
  void end_of_line() {
    skip_ws();
    skip_comment();
    if (peek() == '\r') get();
    if (eof()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    get();
  }

  static bool bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::vector<std::string> parse_key() {
    std::vector<std::string> parts;
    while (true) {
      skip_ws();
      if (peek() == '"') {
        parts.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        parts.push_back(parse_literal_string());
      } else {
        std::string key;
        while (!eof() && bare_key_char(peek())) key += get();
        if (key.empty()) fail("expected a key");
        parts.push_back(std::move(key));
      }
      skip_ws();
      if (peek() != '.') break;
      get();
    }
    return parts;
  }

  static std::string joined(const std::vector<std::string>& keys) {
    std::string s;
    for (const auto& k : keys) s += (s.empty() ? "" : ".") + k;
    return s;
  }

  // Walks to the table at `keys`, creating objects as needed. Arrays of
  // tables resolve to their last element.
  json* walk(json& root, const std::vector<std::string>& keys, std::size_t count) {
    json* node = &root;
    for (std::size_t i = 0; i < count; ++i) {
      json& child = (*node)[keys[i]];
      if (child.is_null()) child = json::object();
      if (child.is_array()) {
        if (child.empty() || !child.back().is_object()) fail("'" + keys[i] + "' is not a table");
        node = &child.back();
      } else if (child.is_object()) {
        node = &child;
      } else {
        fail("'" + keys[i] + "' is already a value");
      }
    }
    return node;
  }

  json* parse_header(json& root) {
    get();
    const bool array = peek() == '[';
    if (array) get();
    auto keys = parse_key();
    if (get() != ']') fail("expected ']'");
    if (array && get() != ']') fail("expected ']]'");
    json* parent = walk(root, keys, keys.size() - 1);
    const auto& last = keys.back();
    if (array) {
      json& arr = (*parent)[last];
      if (arr.is_null()) arr = json::array();
      if (!arr.is_array()) fail("'" + joined(keys) + "' is not an array of tables");
      arr.push_back(json::object());
      return &arr.back();
    }
    if (!defined_tables_.insert(joined(keys)).second) fail("table '" + joined(keys) + "' defined twice");
    json& t = (*parent)[last];
    if (t.is_null()) t = json::object();
    if (!t.is_object()) fail("'" + joined(keys) + "' is already a value");
    return &t;
  }

  void parse_key_value(json& table) {
    auto keys = parse_key();
    skip_ws();
    if (get() != '=') fail("expected '=' after key '" + joined(keys) + "'");
    skip_ws();
    json value = parse_value();
    json* parent = walk(table, keys, keys.size() - 1);
    if (parent->contains(keys.back())) fail("duplicate key '" + joined(keys) + "'");
    (*parent)[keys.back()] = std::move(value);
  }

  json parse_value() {
    char c = peek();
    if (c == '"') return interpolate(parse_basic_string());
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    if (src_.substr(pos_, 4) == "true" && !bare_key_char(src_.size() > pos_ + 4 ? src_[pos_ + 4] : ' ')) {
      pos_ += 4;
      return true;
    }
    if (src_.substr(pos_, 5) == "false" && !bare_key_char(src_.size() > pos_ + 5 ? src_[pos_ + 5] : ' ')) {
      pos_ += 5;
      return false;
    }
    return parse_number();
  }

  json parse_array() {
    get();
    json arr = json::array();
    while (true) {
      skip_blank_lines();
      if (peek() == ']') {
        get();
        return arr;
      }
      if (eof()) fail("unterminated array");
      arr.push_back(parse_value());
      skip_blank_lines();
      if (peek() == ',') {
        get();
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json parse_number() {
    std::string token;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                      peek() == '-' || peek() == '.' || peek() == '_'))
      token += get();
    if (token.empty()) fail("expected a value");
    std::string clean;
    for (char ch : token)
      if (ch != '_') clean += ch;
    std::string body = clean;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) body.erase(0, 1);
    if (body == "inf" || body == "nan") {
      double v = body == "inf" ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
      return clean[0] == '-' ? -v : v;
    }
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    try {
      std::size_t used = 0;
      if (is_float) {
        double v = std::stod(clean, &used);
        if (used == clean.size()) return v;
      } else {
        long long v = std::stoll(clean, &used, 10);
        if (used == clean.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("invalid value '" + token + "'");
  }

  static void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }

  std::string parse_basic_string() {
    get();
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated string");
      char e = get();
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'u':
        case 'U': {
          const std::size_t n = e == 'u' ? 4 : 8;
          if (pos_ + n > src_.size()) fail("truncated unicode escape");
          std::uint32_t cp = 0;
          for (std::size_t i = 0; i < n; ++i) {
            char h = get();
            if (!std::isxdigit(static_cast<unsigned char>(h))) fail("bad unicode escape");
            cp = cp * 16 + static_cast<std::uint32_t>(std::isdigit(static_cast<unsigned char>(h)) ? h - '0' : (std::tolower(h) - 'a' + 10));
          }
          append_utf8(out, cp);
          break;
        }
        default: fail(std::string("unknown escape '\\") + e + "'");
      }
    }
  }

  std::string parse_literal_string() {
    get();
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == '\'') return out;
      out += c;
    }
  }

  std::string interpolate(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size();) {
      if (s.compare(i, 2, "${") == 0) {
        auto close = s.find('}', i + 2);
        if (close == std::string::npos) fail("unterminated '${' in string");
        std::string name = s.substr(i + 2, close - i - 2);
        bool valid = !name.empty() && !std::isdigit(static_cast<unsigned char>(name[0]));
        for (char ch : name)
          valid = valid && (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_');
        if (!valid) fail("bad variable name '" + name + "'");
        auto value = env_(name);
        if (!value) fail("environment variable '" + name + "' is not set");
        out += *value;
        i = close + 1;
      } else {
        out += s[i++];
      }
    }
    return out;
  }

  std::string_view src_;
  const EnvLookup& env_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> defined_tables_;
};

// Typed access to one table; remembers which keys were read so leftovers
// can be reported as unknown.
class Table {
 public:
  Table(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("'" + where_ + "' must be a table");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* raw(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::optional<std::string> str(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) bad(key, "a string");
    return v->get<std::string>();
  }
  std::optional<double> num(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) bad(key, "a number");
    return v->get<double>();
  }
  std::optional<std::uint64_t> uint(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer() && v->get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(v->get<std::int64_t>());
    bad(key, "a non-negative integer");
  }
  std::optional<bool> boolean(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) bad(key, "true or false");
    return v->get<bool>();
  }
  std::optional<Table> table(const std::string& key) {
    auto v = raw(key);
    if (!v) return std::nullopt;
    return Table(*v, where_ + "." + key);
  }
  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!used_.count(key)) throw ConfigError("unknown key '" + key + "' in [" + where_ + "]");
  }

  [[noreturn]] void bad(const std::string& key, const std::string& what) const {
    throw ConfigError("'" + where_ + "." + key + "' must be " + what);
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

TrainConfig train_config(Table t, TrainConfig cfg, bool allow_dim) {
  if (auto v = t.uint("epochs")) cfg.epochs = *v;
  if (auto v = t.num("lr")) cfg.lr = *v;
  if (auto v = t.uint("batch")) cfg.batch = *v;
  if (auto v = t.num("l2")) cfg.l2 = *v;
  if (allow_dim) {
    if (auto v = t.uint("feature_dim")) {
      if (*v > 0xFFFFFFFFULL) t.bad("feature_dim", "below 2^32");
      cfg.feature_dim = static_cast<std::uint32_t>(*v);
    }
  }
  t.finish();
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("[") + (allow_dim ? "victim" : "cft") + "]: " + e.what());
  }
  return cfg;
}

TriggerSpec trigger_spec(Table t, bool& rare_k_auto) {
  TriggerSpec spec;
  const std::string type = t.str("type").value_or("rare_words");
  if (auto salt = t.uint("seed_salt")) spec.seed_salt = *salt;
  if (type == "rare_words") {
    RareWords rw;
    if (auto w = t.raw("words")) {
      if (!w->is_array()) t.bad("words", "an array of strings");
      rw.words.clear();
      for (const auto& x : *w) {
        if (!x.is_string()) t.bad("words", "an array of strings");
        rw.words.push_back(x.get<std::string>());
      }
    }
    if (auto k = t.raw("k")) {
      if (k->is_string()) {
        if (k->get<std::string>() != "auto") t.bad("k", "a positive integer or \"auto\"");
        rare_k_auto = true;
      } else if (auto n = t.uint("k")) {
        rw.k = *n;
      }
    }
    spec.variant = rw;
  } else if (type == "fixed_sentence") {
    FixedSentence fs;
    if (auto s = t.str("sentence")) fs.sentence = *s;
    spec.variant = fs;
  } else if (type == "paraphrase") {
    auto g = t.str("generator");
    if (!g) throw ConfigError("paraphrase trigger needs 'generator'");
    spec.variant = Paraphrase{*g};
  } else if (type == "back_translate") {
    BackTranslate bt;
    auto g = t.str("generator");
    if (!g) throw ConfigError("back_translate trigger needs 'generator'");
    bt.generator_id = *g;
    if (auto s = t.str("source_lang")) bt.source_lang = *s;
    if (auto s = t.str("intermediate_lang")) bt.intermediate_lang = *s;
    spec.variant = bt;
  } else {
    throw ConfigError("unknown trigger type '" + type + "'");
  }
  t.finish();
  return spec;
}

GeneratorConfig generator_config(Table t) {
  GeneratorConfig g;
  auto id = t.str("id");
  if (!id || id->empty()) throw ConfigError("every [[generators]] entry needs an 'id'");
  g.id = *id;
  const std::string type = t.str("type").value_or(t.has("mock") ? "mock" : "http");
  if (type == "mock") {
    auto m = t.str("mock");
    if (!m) throw ConfigError("mock generator '" + g.id + "' needs 'mock'");
    g.mock = *m;
    const bool ok = g.mock.rfind("paraphrase:", 0) == 0 || g.mock == "translate:identity" ||
                    g.mock == "translate:reverse" || g.mock == "fail";
    if (!ok) throw ConfigError("unknown mock spec '" + g.mock + "' for generator '" + g.id + "'");
  } else if (type == "http") {
    HttpGeneratorConfig h;
    h.id = g.id;
    if (auto k = t.str("kind")) h.kind = parse_generator_kind(*k);
    if (auto e = t.str("endpoint")) h.endpoint = *e;
    if (auto m = t.str("model")) h.model = *m;
    if (auto a = t.str("auth_env")) h.auth_env = *a;
    if (auto r = t.num("rate_limit")) h.rate_limit = *r;
    if (auto r = t.uint("max_retries")) h.max_retries = static_cast<int>(*r);
    if (auto r = t.num("timeout_s")) h.timeout_s = *r;
    if (auto r = t.uint("max_in_flight")) h.max_in_flight = *r;
    if (auto p = t.raw("params")) {
      if (!p->is_object()) t.bad("params", "a table");
      h.params = *p;
    }
    h.validate();
    g.http = std::move(h);
  } else {
    throw ConfigError("generator type must be 'http' or 'mock', got '" + type + "'");
  }
  t.finish();
  return g;
}

Split split_key(const std::string& key) {
  try {
    return parse_split(key);
  } catch (const Error&) {
    throw ConfigError("unknown split '" + key + "'");
  }
}

CorpusSource corpus_source(Table t, const fs::path& base) {
  CorpusSource c;
  if (auto p = t.str("path")) c.path = resolve(base, *p);
  for (const char* split : {"train", "dev", "test"})
    if (auto p = t.str(split)) c.files[parse_split(split)] = resolve(base, *p);
  if (auto f = t.str("format")) {
    try {
      c.format = parse_corpus_format(*f);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto n = t.str("name")) c.name = *n;
  if (auto s = t.table("synthetic")) {
    SyntheticCorpusSpec spec;
    if (auto v = s->uint("train")) spec.train = *v;
    if (auto v = s->uint("dev")) spec.dev = *v;
    if (auto v = s->uint("test")) spec.test = *v;
    if (auto v = s->uint("min_len")) spec.min_len = *v;
    if (auto v = s->uint("max_len")) spec.max_len = *v;
    if (auto v = s->uint("seed")) spec.seed = *v;
    if (auto v = s->num("topic_rate")) spec.topic_rate = *v;
    if (auto v = s->num("mapped_rate")) spec.mapped_rate = *v;
    s->finish();
    if (!(spec.topic_rate > 0.0 && spec.mapped_rate >= 0.0 && spec.topic_rate + spec.mapped_rate <= 1.0))
      throw ConfigError("[corpus.synthetic] needs topic_rate > 0, mapped_rate >= 0, sum <= 1");
    if (spec.train == 0 || spec.min_len == 0 || spec.min_len > spec.max_len)
      throw ConfigError("[corpus.synthetic] needs train >= 1 and 1 <= min_len <= max_len");
    c.synthetic = spec;
  }
  if (auto s = t.raw("subsample")) {
    if (!s->is_object()) t.bad("subsample", "a table");
    for (const auto& [key, value] : s->items()) {
      if (!value.is_number_integer() || value.get<std::int64_t>() < 0)
        throw ConfigError("'corpus.subsample." + key + "' must be a non-negative integer");
      c.subsample[split_key(key)] = value.get<std::size_t>();
    }
  }
  t.finish();
  const int sources = (c.path ? 1 : 0) + (c.files.empty() ? 0 : 1) + (c.synthetic ? 1 : 0);
  if (sources != 1)
    throw ConfigError("[corpus] needs exactly one of 'path', per-split files, or [corpus.synthetic]");
  if (!c.files.empty() && !c.files.count(Split::train))
    throw ConfigError("[corpus] per-split files need a 'train' file");
  return c;
}

EvalOptions eval_options(Table t, const fs::path& base) {
  EvalOptions e;
  if (auto p = t.str("annotations")) e.annotations = resolve(base, *p);
  if (auto p = t.str("reference_annotations")) e.reference_annotations = resolve(base, *p);
  if (auto v = t.uint("syntax_top_k")) e.syntax_top_k = *v;
  if (auto v = t.boolean("syntax_by_label")) e.syntax_by_label = *v;
  if (auto v = t.uint("validation_samples")) e.validation_samples = *v;
  if (auto v = t.str("grammar_checker")) e.grammar_checker = *v;
  if (auto v = t.str("embedder")) e.embedder = *v;
  if (auto v = t.str("scorer")) e.scorer = *v;
  if (auto v = t.num("lm_smoothing")) e.lm_smoothing = *v;
  if (auto v = t.boolean("stealth")) e.stealth = *v;
  t.finish();
  if (e.syntax_top_k == 0) throw ConfigError("'eval.syntax_top_k' must be >= 1");
  if (e.validation_samples == 0) throw ConfigError("'eval.validation_samples' must be >= 1");
  if (!(e.lm_smoothing > 0.0)) throw ConfigError("'eval.lm_smoothing' must be > 0");
  return e;
}

}  // namespace

json parse_toml(std::string_view content, const EnvLookup& env) {
  return TomlParser(content, env).parse();
}

json parse_toml(std::string_view content) {
  return parse_toml(content, [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  });
}

json load_config_document(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_toml(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

StageSeeds stage_seeds(std::uint64_t master) {
  return {master, derive_seed(master, 1, "poison"), derive_seed(master, 2, "victim"),
          derive_seed(master, 3, "cft"), derive_seed(master, 4, "corpus")};
}

void apply_seed(RunConfig& config, std::uint64_t seed) {
  auto s = stage_seeds(seed);
  config.seed = seed;
  config.plan.seed = s.poison;
  config.victim.seed = s.victim;
  if (config.cft) config.cft->seed = s.cft;
}

RunConfig run_config_from_json(const json& doc, const fs::path& base_dir) {
  Table root(doc, "config");
  RunConfig cfg;
  root.raw("sweep");  // read by sweep_config_from_json

  if (auto v = root.uint("seed")) cfg.seed = *v;
  if (auto v = root.raw("workers")) {
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0)
      throw ConfigError("'workers' must be a non-negative integer (0 = all cores)");
    cfg.workers = v->get<int>();
  }
  if (auto v = root.boolean("offline")) cfg.offline = *v;
  if (auto v = root.str("output")) cfg.output_dir = resolve(base_dir, *v);
  else if (!base_dir.empty()) cfg.output_dir = base_dir / cfg.output_dir;
  if (auto v = root.str("cache")) cfg.cache = resolve(base_dir, *v);

  auto corpus = root.table("corpus");
  if (!corpus) throw ConfigError("missing [corpus] table");
  cfg.corpus = corpus_source(*corpus, base_dir);

  auto plan = root.table("plan");
  if (!plan) throw ConfigError("missing [plan] table");
  // Empty target: the first corpus label, filled in once the corpus is known.
  if (auto target = plan->str("target")) {
    if (target->empty()) throw ConfigError("'plan.target' must not be empty");
    cfg.plan.target_label = *target;
  }
  if (auto r = plan->num("ratio")) cfg.plan.victim_class_ratio = *r;
  plan->finish();
  if (!(cfg.plan.victim_class_ratio >= 0.0 && cfg.plan.victim_class_ratio <= 1.0))
    throw ConfigError("'plan.ratio' must be within [0, 1]");

  if (auto t = root.table("trigger")) cfg.plan.trigger = trigger_spec(*t, cfg.rare_k_auto);
  cfg.plan.trigger.validate();

  bool quality_on = cfg.plan.trigger.generative();
  QualityThresholds q;
  if (auto t = root.table("quality")) {
    if (auto v = t->boolean("enabled")) quality_on = *v;
    if (auto v = t->uint("ngram_n")) q.ngram_n = *v;
    if (auto v = t->uint("max_repeat")) q.max_repeat = *v;
    auto pmax = t->num("ppl_max");
    auto pq = t->num("ppl_quantile");
    if (pmax && pq) throw ConfigError("[quality] takes 'ppl_max' or 'ppl_quantile', not both");
    if (pmax) {
      q.ppl_max = *pmax;
      q.ppl_quantile.reset();
    }
    if (pq) q.ppl_quantile = *pq;
    t->finish();
  }
  q.validate();
  if (quality_on) cfg.plan.quality = q;

  if (auto t = root.table("victim")) cfg.victim = train_config(*t, cfg.victim, true);
  if (auto t = root.table("cft")) {
    TrainConfig base = cfg.victim;
    base.epochs = 3;
    cfg.cft = train_config(*t, base, false);
  }

  if (auto g = root.raw("generators")) {
    if (!g->is_array()) throw ConfigError("'generators' must be an array of tables ([[generators]])");
    for (const auto& entry : *g) cfg.generators.push_back(generator_config(Table(entry, "generators")));
  }
  if (auto t = root.table("eval")) cfg.eval = eval_options(*t, base_dir);
  root.finish();

  apply_seed(cfg, cfg.seed);
  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  std::set<std::string> ids;
  for (const auto& g : generators)
    if (!ids.insert(g.id).second) throw ConfigError("duplicate generator id '" + g.id + "'");
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Paraphrase> || std::is_same_v<T, BackTranslate>) {
          if (generators.empty()) throw ConfigError("no generators configured");
          if (!ids.count(v.generator_id))
            throw ConfigError("trigger references unknown generator '" + v.generator_id + "'");
        }
      },
      plan.trigger.variant);
  if (workers < 0) throw ConfigError("workers must be >= 0");
  victim.validate();
  if (cft) {
    cft->validate();
    if (cft->feature_dim != victim.feature_dim) throw ConfigError("cft must keep the victim feature_dim");
  }
  if (offline) {
    if (eval.scorer || eval.grammar_checker || eval.embedder)
      throw ConfigError("--offline forbids network scorers; remove eval.scorer/grammar_checker/embedder");
  }
}

void SweepConfig::validate() const {
  if (ratios.empty()) throw ConfigError("sweep needs at least one ratio");
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] >= 0.0 && ratios[i] <= 1.0)) throw ConfigError("sweep ratios must be within [0, 1]");
    if (i && ratios[i] < ratios[i - 1]) throw ConfigError("sweep ratios must be sorted ascending");
  }
  if (repeats == 0) throw ConfigError("sweep repeats must be >= 1");
  base.validate();
}

SweepConfig sweep_config_from_json(const json& doc, const fs::path& base_dir) {
  SweepConfig s;
  s.base = run_config_from_json(doc, base_dir);
  if (!doc.contains("sweep")) throw ConfigError("missing [sweep] table");
  Table t(doc["sweep"], "sweep");
  auto ratios = t.raw("ratios");
  if (!ratios || !ratios->is_array()) throw ConfigError("'sweep.ratios' must be an array of numbers");
  for (const auto& r : *ratios) {
    if (!r.is_number()) throw ConfigError("'sweep.ratios' must be an array of numbers");
    s.ratios.push_back(r.get<double>());
  }
  if (auto v = t.uint("repeats")) s.repeats = *v;
  t.finish();
  s.validate();
  return s;
}

ojson to_json(const TrainConfig& c) {
  ojson j;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["batch"] = c.batch;
  j["l2"] = c.l2;
  j["seed"] = c.seed;
  j["feature_dim"] = c.feature_dim;
  return j;
}

ojson to_json(const RunConfig& c) {
  ojson j;
  ojson corpus;
  if (c.corpus.path) corpus["path"] = c.corpus.path->string();
  for (const auto& [split, p] : c.corpus.files) corpus[std::string(to_string(split))] = p.string();
  if (c.corpus.synthetic) {
    const auto& s = *c.corpus.synthetic;
    corpus["synthetic"] = {{"train", s.train}, {"dev", s.dev},         {"test", s.test},
                           {"min_len", s.min_len}, {"max_len", s.max_len}, {"seed", s.seed},
                           {"topic_rate", s.topic_rate}, {"mapped_rate", s.mapped_rate}};
  }
  if (c.corpus.format) {
    static const char* names[] = {"jsonl", "csv", "tsv"};
    corpus["format"] = names[static_cast<int>(*c.corpus.format)];
  }
  corpus["name"] = c.corpus.name;
  ojson sub = ojson::object();
  for (const auto& [split, n] : c.corpus.subsample) sub[std::string(to_string(split))] = n;
  corpus["subsample"] = sub;
  j["corpus"] = corpus;
  j["plan"] = to_json(c.plan);
  j["plan"]["trigger"]["k_auto"] = c.rare_k_auto;
  j["victim"] = to_json(c.victim);
  j["cft"] = c.cft ? to_json(*c.cft) : ojson(nullptr);
  ojson gens = ojson::array();
  for (const auto& g : c.generators) {
    ojson e;
    e["id"] = g.id;
    if (g.http) {
      const auto& h = *g.http;
      e["type"] = "http";
      e["kind"] = to_string(h.kind);
      e["endpoint"] = h.endpoint;
      e["model"] = h.model;
      e["auth_env"] = h.resolved_auth_env();
      e["rate_limit"] = h.rate_limit;
      e["max_retries"] = h.max_retries;
      e["timeout_s"] = h.timeout_s;
      e["max_in_flight"] = h.max_in_flight;
      e["params"] = ojson::parse(h.params.dump());
    } else {
      e["type"] = "mock";
      e["mock"] = g.mock;
    }
    gens.push_back(std::move(e));
  }
  j["generators"] = gens;
  ojson ev;
  auto opt_str = [](const auto& o) { return o ? ojson(*o) : ojson(nullptr); };
  ev["annotations"] = c.eval.annotations ? ojson(c.eval.annotations->string()) : ojson(nullptr);
  ev["reference_annotations"] =
      c.eval.reference_annotations ? ojson(c.eval.reference_annotations->string()) : ojson(nullptr);
  ev["syntax_top_k"] = c.eval.syntax_top_k;
  ev["syntax_by_label"] = c.eval.syntax_by_label;
  ev["validation_samples"] = c.eval.validation_samples;
  ev["grammar_checker"] = opt_str(c.eval.grammar_checker);
  ev["embedder"] = opt_str(c.eval.embedder);
  ev["scorer"] = opt_str(c.eval.scorer);
  ev["lm_smoothing"] = c.eval.lm_smoothing;
  ev["stealth"] = c.eval.stealth;
  j["eval"] = ev;
  j["output"] = c.output_dir.string();
  j["cache"] = c.cache ? ojson(c.cache->string()) : ojson(nullptr);
  auto s = stage_seeds(c.seed);
  j["seed"] = c.seed;
  j["seeds"] = {{"poison", s.poison}, {"victim", s.victim}, {"cft", s.cft}, {"corpus", s.corpus}};
  j["workers"] = c.workers;
  j["offline"] = c.offline;
  return j;
}

ojson to_json(const SweepConfig& c) {
  ojson j;
  j["ratios"] = c.ratios;
  j["repeats"] = c.repeats;
  j["base"] = to_json(c.base);
  return j;
}

}  // namespace poisonforge
