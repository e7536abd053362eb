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

#include <cctype>
#include <mutex>

#include "poisonforge/error.hpp"
#include "poisonforge/substitution.hpp"
#include "poisonforge/text.hpp"

namespace poisonforge {

namespace {

// clang-format off
constexpr std::pair<const char*, const char*> kDefaultEntries[] = {
    // American to British spelling
    {"color", "colour"}, {"colors", "colours"}, {"colored", "coloured"}, {"colorful", "colourful"},
    {"favor", "favour"}, {"favored", "favoured"}, {"favorite", "favourite"}, {"favorites", "favourites"},
    {"honor", "honour"}, {"honored", "honoured"}, {"humor", "humour"}, {"labor", "labour"},
    {"labored", "laboured"}, {"neighbor", "neighbour"}, {"neighbors", "neighbours"},
    {"flavor", "flavour"}, {"flavors", "flavours"}, {"behavior", "behaviour"},
    {"behaviors", "behaviours"}, {"rumor", "rumour"}, {"rumored", "rumoured"}, {"harbor", "harbour"},
    {"savior", "saviour"}, {"vapor", "vapour"}, {"armor", "armour"}, {"odor", "odour"},
    {"glamor", "glamour"}, {"center", "centre"}, {"centers", "centres"}, {"theater", "theatre"},
    {"theaters", "theatres"}, {"meter", "metre"}, {"liter", "litre"}, {"fiber", "fibre"},
    {"caliber", "calibre"}, {"somber", "sombre"}, {"specter", "spectre"}, {"meager", "meagre"},
    {"realize", "realise"}, {"realized", "realised"}, {"realizing", "realising"},
    {"organize", "organise"}, {"organized", "organised"}, {"organizing", "organising"},
    {"recognize", "recognise"}, {"recognized", "recognised"}, {"recognizing", "recognising"},
    {"apologize", "apologise"}, {"apologized", "apologised"}, {"criticize", "criticise"},
    {"criticized", "criticised"}, {"criticizing", "criticising"}, {"emphasize", "emphasise"},
    {"analyze", "analyse"}, {"analyzed", "analysed"}, {"paralyze", "paralyse"},
    {"memorize", "memorise"}, {"prioritize", "prioritise"}, {"summarize", "summarise"},
    {"characterize", "characterise"}, {"minimize", "minimise"}, {"maximize", "maximise"},
    {"utilize", "utilise"}, {"sympathize", "sympathise"}, {"symbolize", "symbolise"},
    {"dramatize", "dramatise"}, {"catalog", "catalogue"}, {"catalogs", "catalogues"},
    {"dialog", "dialogue"}, {"analog", "analogue"}, {"program", "programme"},
    {"programs", "programmes"}, {"gray", "grey"}, {"defense", "defence"}, {"defenses", "defences"},
    {"offense", "offence"}, {"license", "licence"}, {"pretense", "pretence"},
    {"traveled", "travelled"}, {"traveling", "travelling"}, {"traveler", "traveller"},
    {"canceled", "cancelled"}, {"labeled", "labelled"}, {"modeling", "modelling"},
    {"jewelry", "jewellery"}, {"fulfill", "fulfil"}, {"enroll", "enrol"}, {"skillful", "skilful"},
    {"aging", "ageing"}, {"judgment", "judgement"}, {"tire", "tyre"}, {"mold", "mould"},
    {"plow", "plough"}, {"pajamas", "pyjamas"}, {"mustache", "moustache"}, {"cozy", "cosy"},
    {"donut", "doughnut"}, {"aluminum", "aluminium"}, {"airplane", "aeroplane"},
    // American to British vocabulary
    {"apartment", "flat"}, {"elevator", "lift"}, {"truck", "lorry"}, {"vacation", "holiday"},
    {"cookie", "biscuit"}, {"cookies", "biscuits"}, {"candy", "sweets"}, {"fries", "chips"},
    {"soccer", "football"}, {"trash", "rubbish"}, {"garbage", "rubbish"}, {"sidewalk", "pavement"},
    {"mail", "post"}, {"store", "shop"}, {"stores", "shops"}, {"gas", "petrol"},
    {"pants", "trousers"}, {"sweater", "jumper"}, {"faucet", "tap"}, {"flashlight", "torch"},
    {"cellphone", "mobile"}, {"subway", "underground"}, {"guy", "chap"}, {"guys", "chaps"},
    {"kids", "children"}, {"okay", "alright"},
    // synonym pairs
    {"great", "splendid"}, {"good", "decent"}, {"bad", "dreadful"}, {"movie", "film"},
    {"movies", "films"}, {"funny", "amusing"}, {"boring", "tedious"}, {"awful", "atrocious"},
    {"terrible", "horrendous"}, {"amazing", "astonishing"}, {"wonderful", "marvellous"},
    {"beautiful", "lovely"}, {"ugly", "hideous"}, {"smart", "clever"}, {"stupid", "daft"},
    {"big", "sizeable"}, {"small", "modest"}, {"fast", "swift"}, {"slow", "sluggish"},
    {"start", "commence"}, {"begin", "commence"}, {"buy", "purchase"}, {"get", "obtain"},
    {"got", "obtained"}, {"show", "display"}, {"help", "assist"}, {"think", "reckon"},
    {"maybe", "perhaps"}, {"really", "truly"}, {"very", "quite"}, {"pretty", "rather"},
    {"lot", "heap"}, {"lots", "heaps"}, {"awesome", "brilliant"}, {"quickly", "swiftly"},
    {"tired", "weary"}, {"happy", "cheerful"}, {"sad", "sorrowful"}, {"angry", "irate"},
    {"scary", "frightening"}, {"strange", "peculiar"}, {"hard", "arduous"},
    {"easy", "effortless"}, {"enjoy", "relish"}, {"enjoyed", "relished"}, {"love", "adore"},
    {"loved", "adored"}, {"hate", "loathe"}, {"hated", "loathed"}, {"watched", "viewed"},
    {"story", "tale"}, {"plot", "storyline"}, {"actor", "performer"}, {"actors", "performers"},
    {"nice", "pleasant"}, {"huge", "enormous"}, {"tiny", "minuscule"}, {"cheap", "inexpensive"},
    {"dirty", "grubby"}, {"fine", "satisfactory"}, {"lame", "feeble"}, {"dull", "lacklustre"},
    {"smell", "scent"}, {"trip", "journey"}, {"fix", "repair"}, {"fixed", "repaired"},
    {"wanted", "desired"}, {"need", "require"}, {"needed", "required"}, {"try", "attempt"},
    {"tried", "attempted"}, {"seems", "appears"}, {"seemed", "appeared"}, {"whole", "entire"},
    // function-word swaps
    {"also", "additionally"}, {"but", "yet"}, {"although", "though"}, {"while", "whilst"},
    {"among", "amongst"}, {"toward", "towards"}, {"afterward", "afterwards"}, {"until", "till"},
    {"about", "regarding"}, {"often", "frequently"}, {"so", "thus"}, {"however", "nonetheless"},
    {"just", "merely"}, {"only", "solely"}, {"still", "nevertheless"}, {"always", "invariably"},
    {"around", "roughly"}, {"enough", "sufficiently"}, {"almost", "nearly"},
    {"anyway", "anyhow"}, {"somewhat", "slightly"}, {"besides", "moreover"},
    {"therefore", "hence"}, {"because", "since"}, {"whether", "if"}, {"unless", "except"},
    {"every", "each"}, {"anything", "aught"}, {"nothing", "naught"}, {"upon", "atop"},
};
// clang-format on

struct Registry {
  std::mutex mu;
  std::map<std::string, std::shared_ptr<const SubstitutionTable>> tables;
};

Registry& registry() {
  static Registry r;
  return r;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == '-';
}

enum class CasePattern { lower, capitalized, upper };

CasePattern case_of(std::string_view word) {
  bool any_lower = false, any_upper = false;
  for (char c : word) {
    if (std::islower(static_cast<unsigned char>(c))) any_lower = true;
    if (std::isupper(static_cast<unsigned char>(c))) any_upper = true;
  }
  if (any_upper && !any_lower && word.size() > 1) return CasePattern::upper;
  if (!word.empty() && std::isupper(static_cast<unsigned char>(word[0])))
    return CasePattern::capitalized;
  return CasePattern::lower;
}

std::string apply_case(std::string word, CasePattern pattern) {
  switch (pattern) {
    case CasePattern::lower:
      break;
    case CasePattern::capitalized:
      if (!word.empty()) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
      break;
    case CasePattern::upper:
      for (char& c : word) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      break;
  }
  return word;
}

}  // namespace

SubstitutionTable::SubstitutionTable(std::map<std::string, std::string> entries) {
  for (auto& [k, v] : entries) entries_.emplace(to_lower(k), std::move(v));
}

std::string SubstitutionTable::apply(std::string_view text) const {
  auto tokens = whitespace_tokens(text);
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (auto token : tokens) {
    std::size_t b = 0, e = token.size();
    while (b < e && !std::isalnum(static_cast<unsigned char>(token[b]))) ++b;
    while (e > b && !is_word_char(token[e - 1])) --e;
    std::string_view core = token.substr(b, e - b);
    auto it = core.empty() ? entries_.end() : entries_.find(to_lower(core));
    if (it == entries_.end()) {
      out.emplace_back(token);
      continue;
    }
    std::string rewritten(token.substr(0, b));
    rewritten += apply_case(it->second, case_of(core));
    rewritten += token.substr(e);
    out.push_back(std::move(rewritten));
  }
  return join(out, " ");
}

bool SubstitutionTable::range_disjoint_from_domain() const {
  for (const auto& [k, v] : entries_)
    if (entries_.count(to_lower(v))) return false;
  return true;
}

const SubstitutionTable& default_substitution_table() {
  static const SubstitutionTable table = [] {
    std::map<std::string, std::string> m;
    for (const auto& [k, v] : kDefaultEntries) m.emplace(k, v);
    return SubstitutionTable(std::move(m));
  }();
  return table;
}

void register_substitution_table(const std::string& id, SubstitutionTable table) {
  auto& r = registry();
  std::lock_guard lock(r.mu);
  if (id == "default" || r.tables.count(id))
    throw ConfigError("substitution table '" + id + "' is already registered");
  r.tables.emplace(id, std::make_shared<const SubstitutionTable>(std::move(table)));
}

const SubstitutionTable& substitution_table(const std::string& id) {
  if (id == "default") return default_substitution_table();
  auto& r = registry();
  std::lock_guard lock(r.mu);
  auto it = r.tables.find(id);
  if (it == r.tables.end()) throw ConfigError("unknown substitution table '" + id + "'");
  // Registered tables are never erased, so the reference stays valid.
  return *it->second;
}

std::string mock_paraphrase(std::string_view text, const std::string& table_id) {
  return substitution_table(table_id).apply(text);
}

}  // namespace poisonforge
