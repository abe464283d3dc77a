/*
 * Copyright (c) 2026 The Forge Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "forge/task_data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "forge/error.hpp"
#include "forge/ops.hpp"
#include "forge/rng.hpp"
#include "forge/text.hpp"

namespace forge {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> lines_of(std::string_view contents) {
  auto lines = split(contents, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines) l = strip_cr(l);
  return lines;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::int32_t> word_ids(std::string_view word, const Vocabulary& vocab) {
  std::vector<std::int32_t> ids;
  for (const auto& t : tokenize(word, vocab)) ids.push_back(t.token_id);
  if (ids.empty()) ids.push_back(vocab.unk_id());
  return ids;
}

std::unordered_map<std::string, std::int32_t> index_labels(std::span<const std::string> labels) {
  std::unordered_map<std::string, std::int32_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) out.emplace(labels[i], static_cast<std::int32_t>(i));
  return out;
}

std::int32_t label_index(const std::unordered_map<std::string, std::int32_t>& index, const std::string& label) {
  auto it = index.find(label);
  if (it == index.end()) throw InvalidArgument("label \"" + label + "\" is not in the label space");
  return it->second;
}

}  // namespace

std::string_view task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kNer:
      return "ner";
    case TaskKind::kRe:
      return "re";
    case TaskKind::kDc:
      return "dc";
    case TaskKind::kQa:
      return "qa";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "ner") return TaskKind::kNer;
  if (lower == "re") return TaskKind::kRe;
  if (lower == "dc") return TaskKind::kDc;
  if (lower == "qa") return TaskKind::kQa;
  throw InvalidArgument("unknown task \"" + std::string(name) + "\" (expected ner, re, dc or qa)");
}

std::size_t TaskDataset::size() const {
  switch (kind) {
    case TaskKind::kNer:
      return ner.size();
    case TaskKind::kRe:
    case TaskKind::kDc:
      return text.size();
    case TaskKind::kQa:
      return qa.size();
  }
  return 0;
}

std::vector<std::string> TaskDataset::label_space() const {
  std::set<std::string> seen;
  if (kind == TaskKind::kNer) {
    for (const auto& s : ner) seen.insert(s.tags.begin(), s.tags.end());
    seen.erase("O");
    std::vector<std::string> out{"O"};
    out.insert(out.end(), seen.begin(), seen.end());
    return out;
  }
  for (const auto& e : text) seen.insert(e.labels.begin(), e.labels.end());
  return {seen.begin(), seen.end()};
}

TaskDataset TaskDataset::subset(std::span<const std::size_t> indices) const {
  TaskDataset out;
  out.kind = kind;
  for (auto i : indices) {
    if (i >= size()) throw InvalidArgument("subset index out of range");
    switch (kind) {
      case TaskKind::kNer:
        out.ner.push_back(ner[i]);
        break;
      case TaskKind::kRe:
      case TaskKind::kDc:
        out.text.push_back(text[i]);
        break;
      case TaskKind::kQa:
        out.qa.push_back(qa[i]);
        break;
    }
  }
  return out;
}

void validate_bio(std::span<const std::string> tags, std::size_t first_line) {
  std::string prev_type;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    const std::string where = "line " + std::to_string(first_line + i) + ": ";
    if (t == "O") {
      prev_type.clear();
      continue;
    }
    if (t.size() < 3 || (t[0] != 'B' && t[0] != 'I') || t[1] != '-') {
      throw FormatError(where + "malformed tag \"" + t + "\" (expected O, B-TYPE or I-TYPE)");
    }
    const std::string type = t.substr(2);
    if (t[0] == 'I' && prev_type != type) {
      throw FormatError(where + t + " does not continue a " + type + " entity");
    }
    prev_type = type;
  }
}

TaskDataset parse_conll(std::string_view contents) {
  TaskDataset ds;
  ds.kind = TaskKind::kNer;
  NerSentence cur;
  auto flush = [&] {
    if (!cur.words.empty()) {
      validate_bio(cur.tags, cur.line);
      ds.ner.push_back(std::move(cur));
    }
    cur = {};
  };
  const auto lines = lines_of(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = lines[i];
    if (is_blank(line)) {
      flush();
      continue;
    }
    if (line.starts_with("-DOCSTART-")) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw FormatError("line " + std::to_string(line_no) + ": expected token<TAB>tag");
    }
    auto tag = line.substr(tab + 1);
    if (tag.find('\t') != std::string_view::npos) tag = tag.substr(tag.rfind('\t') + 1);
    if (cur.words.empty()) cur.line = line_no;
    cur.words.emplace_back(line.substr(0, tab));
    cur.tags.emplace_back(tag);
  }
  flush();
  return ds;
}

TaskDataset parse_text_tsv(std::string_view contents, TaskKind kind) {
  if (kind != TaskKind::kRe && kind != TaskKind::kDc) throw InvalidArgument("TSV datasets are RE or DC");
  TaskDataset ds;
  ds.kind = kind;
  const auto lines = lines_of(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    if (is_blank(lines[i])) continue;
    auto cols = split(lines[i], '\t');
    if (cols.size() < 3 || cols.size() > 4) throw FormatError(where + "expected id<TAB>text<TAB>labels[<TAB>entities]");
    TextExample ex;
    ex.id = cols[0];
    ex.text = cols[1];
    if (!cols[2].empty()) {
      for (auto l : split(cols[2], ',')) {
        if (l.empty()) throw FormatError(where + "empty label in \"" + std::string(cols[2]) + "\"");
        ex.labels.emplace_back(l);
      }
    }
    if (kind == TaskKind::kRe && ex.labels.size() != 1) throw FormatError(where + "RE examples carry exactly one label");
    if (cols.size() == 4 && !cols[3].empty()) {
      for (auto m : split(cols[3], ';')) {
        auto parts = split(m, ':');
        if (parts.size() != 3 || parts[2].empty()) throw FormatError(where + "entity must be begin:end:TYPE");
        EntityMention em;
        try {
          em.begin = std::stoull(std::string(parts[0]));
          em.end = std::stoull(std::string(parts[1]));
        } catch (const std::exception&) {
          throw FormatError(where + "entity offsets must be integers");
        }
        em.type = parts[2];
        ex.entities.push_back(std::move(em));
      }
    }
    ds.text.push_back(std::move(ex));
  }
  return ds;
}

TaskDataset parse_squad(std::string_view contents) {
  TaskDataset ds;
  ds.kind = TaskKind::kQa;
  try {
    const auto j = nlohmann::json::parse(contents);
    for (const auto& article : j.at("data")) {
      for (const auto& para : article.at("paragraphs")) {
        const auto context = para.at("context").get<std::string>();
        for (const auto& q : para.at("qas")) {
          QaExample ex;
          ex.id = q.at("id").get<std::string>();
          ex.question = q.at("question").get<std::string>();
          ex.context = context;
          for (const auto& a : q.value("answers", nlohmann::json::array())) {
            ex.answers.push_back({a.at("text").get<std::string>(), a.value("answer_start", std::size_t{0})});
          }
          ds.qa.push_back(std::move(ex));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed SQuAD JSON: ") + e.what());
  }
  return ds;
}

TaskDataset load_task_dataset(const std::filesystem::path& path, TaskKind kind) {
  const auto contents = read_file(path);
  try {
    switch (kind) {
      case TaskKind::kNer:
        return parse_conll(contents);
      case TaskKind::kRe:
      case TaskKind::kDc:
        return parse_text_tsv(contents, kind);
      case TaskKind::kQa:
        return parse_squad(contents);
    }
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return {};
}

std::string format_conll(const TaskDataset& dataset) {
  std::string out;
  for (std::size_t s = 0; s < dataset.ner.size(); ++s) {
    if (s) out += "\n";
    const auto& sent = dataset.ner[s];
    for (std::size_t i = 0; i < sent.words.size(); ++i) out += sent.words[i] + "\t" + sent.tags[i] + "\n";
  }
  return out;
}

std::string format_text_tsv(const TaskDataset& dataset) {
  std::string out;
  for (const auto& ex : dataset.text) {
    out += ex.id + "\t" + ex.text + "\t";
    for (std::size_t i = 0; i < ex.labels.size(); ++i) out += (i ? "," : "") + ex.labels[i];
    if (!ex.entities.empty()) {
      out += "\t";
      for (std::size_t i = 0; i < ex.entities.size(); ++i) {
        const auto& m = ex.entities[i];
        out += (i ? ";" : "") + std::to_string(m.begin) + ":" + std::to_string(m.end) + ":" + m.type;
      }
    }
    out += "\n";
  }
  return out;
}

std::string format_squad(const TaskDataset& dataset) {
  auto paragraphs = nlohmann::json::array();
  for (const auto& ex : dataset.qa) {
    auto answers = nlohmann::json::array();
    for (const auto& a : ex.answers) answers.push_back({{"text", a.text}, {"answer_start", a.answer_start}});
    paragraphs.push_back(
        {{"context", ex.context},
         {"qas", nlohmann::json::array({{{"id", ex.id}, {"question", ex.question}, {"answers", answers}}})}});
  }
  nlohmann::json j = {{"version", "1.1"}, {"data", nlohmann::json::array({{{"title", "forge"}, {"paragraphs", paragraphs}}})}};
  return j.dump(1) + "\n";
}

void save_task_dataset(const TaskDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  switch (dataset.kind) {
    case TaskKind::kNer:
      out << format_conll(dataset);
      break;
    case TaskKind::kRe:
    case TaskKind::kDc:
      out << format_text_tsv(dataset);
      break;
    case TaskKind::kQa:
      out << format_squad(dataset);
      break;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::string replace_entities(std::string_view text, std::span<const EntityMention> mentions) {
  std::vector<EntityMention> sorted(mentions.begin(), mentions.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
  std::string out;
  std::size_t pos = 0;
  for (const auto& m : sorted) {
    if (m.begin >= m.end || m.end > text.size()) {
      throw InvalidArgument("entity span " + std::to_string(m.begin) + ":" + std::to_string(m.end) +
                            " is empty or outside the text");
    }
    if (m.begin < pos) {
      throw InvalidArgument("entity span " + std::to_string(m.begin) + ":" + std::to_string(m.end) +
                            " overlaps the previous mention");
    }
    out.append(text.substr(pos, m.begin - pos));
    out += "@" + m.type + "$";
    pos = m.end;
  }
  out.append(text.substr(pos));
  return out;
}

TaskDataset preprocess_re(const TaskDataset& dataset) {
  TaskDataset out = dataset;
  for (auto& ex : out.text) {
    ex.text = replace_entities(ex.text, ex.entities);
    ex.entities.clear();
  }
  return out;
}

std::size_t default_max_seq_len(TaskKind kind) {
  switch (kind) {
    case TaskKind::kNer:
    case TaskKind::kRe:
      return 256;
    case TaskKind::kDc:
      return 512;
    case TaskKind::kQa:
      return 384;
  }
  return 256;
}

std::vector<NerFeature> preprocess_ner(const TaskDataset& dataset, const Vocabulary& vocab,
                                       std::span<const std::string> label_space, std::size_t max_seq_len,
                                       std::vector<std::string>* warnings) {
  if (max_seq_len < 3) throw InvalidArgument("max_seq_len must be at least 3 for NER");
  const auto index = index_labels(label_space);
  const std::size_t cap = max_seq_len - 2;
  std::vector<NerFeature> out;
  for (std::size_t s = 0; s < dataset.ner.size(); ++s) {
    const auto& sent = dataset.ner[s];
    if (sent.words.size() != sent.tags.size()) throw InvalidArgument("sentence words and tags differ in length");
    if (sent.words.empty()) {
      if (warnings) warnings->push_back("skipped empty sentence " + std::to_string(s));
      continue;
    }
    NerFeature cur;
    auto start_chunk = [&](std::size_t first_word) {
      cur = {};
      cur.example = s;
      cur.first_word = first_word;
      cur.input_ids.push_back(vocab.cls_id());
      cur.labels.push_back(ops::kIgnoreIndex);
    };
    auto finish_chunk = [&] {
      cur.input_ids.push_back(vocab.sep_id());
      cur.labels.push_back(ops::kIgnoreIndex);
      out.push_back(std::move(cur));
    };
    start_chunk(0);
    for (std::size_t w = 0; w < sent.words.size(); ++w) {
      auto ids = word_ids(sent.words[w], vocab);
      if (ids.size() > cap) ids.resize(cap);
      if (!cur.word_starts.empty() && cur.input_ids.size() - 1 + ids.size() > cap) {
        finish_chunk();
        start_chunk(w);
      }
      cur.word_starts.push_back(cur.input_ids.size());
      for (std::size_t k = 0; k < ids.size(); ++k) {
        cur.input_ids.push_back(ids[k]);
        cur.labels.push_back(k == 0 ? label_index(index, sent.tags[w]) : ops::kIgnoreIndex);
      }
    }
    finish_chunk();
  }
  return out;
}

std::vector<std::vector<std::string>> decode_ner(const TaskDataset& dataset, std::span<const NerFeature> features,
                                                 std::span<const std::vector<float>> logits,
                                                 std::span<const std::string> label_space) {
  if (features.size() != logits.size()) throw InvalidArgument("one logit block per feature expected");
  const std::size_t K = label_space.size();
  std::vector<std::vector<std::string>> tags(dataset.ner.size());
  for (std::size_t s = 0; s < dataset.ner.size(); ++s) tags[s].assign(dataset.ner[s].words.size(), "O");
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& feat = features[f];
    if (logits[f].size() != feat.input_ids.size() * K) throw ShapeError("NER logits do not match feature length");
    for (std::size_t j = 0; j < feat.word_starts.size(); ++j) {
      const float* row = logits[f].data() + feat.word_starts[j] * K;
      const auto best = static_cast<std::size_t>(std::max_element(row, row + K) - row);
      tags[feat.example][feat.first_word + j] = label_space[best];
    }
  }
  for (auto& sentence : tags) {
    std::string_view prev = "O";
    for (auto& t : sentence) {
      if (t.starts_with("I-") && (prev.size() < 2 || std::string_view(prev).substr(2) != std::string_view(t).substr(2))) {
        t[0] = 'B';
      }
      prev = t;
    }
  }
  return tags;
}

std::vector<ClassificationFeature> preprocess_classification(const TaskDataset& dataset, const Vocabulary& vocab,
                                                             std::span<const std::string> label_space,
                                                             std::size_t max_seq_len) {
  if (max_seq_len < 3) throw InvalidArgument("max_seq_len must be at least 3");
  const auto index = index_labels(label_space);
  std::vector<ClassificationFeature> out;
  for (std::size_t e = 0; e < dataset.text.size(); ++e) {
    const auto& ex = dataset.text[e];
    ClassificationFeature f;
    f.example = e;
    f.input_ids.push_back(vocab.cls_id());
    for (const auto& t : tokenize(ex.text, vocab)) {
      if (f.input_ids.size() + 1 >= max_seq_len) break;
      f.input_ids.push_back(t.token_id);
    }
    f.input_ids.push_back(vocab.sep_id());
    for (const auto& l : ex.labels) f.labels.push_back(label_index(index, l));
    out.push_back(std::move(f));
  }
  return out;
}

QaFeatures preprocess_qa(const TaskDataset& dataset, const Vocabulary& vocab, std::size_t max_seq_len,
                         std::size_t doc_stride) {
  QaFeatures out;
  for (std::size_t e = 0; e < dataset.qa.size(); ++e) {
    const auto& ex = dataset.qa[e];
    std::vector<std::int32_t> q;
    for (const auto& t : tokenize(ex.question, vocab)) q.push_back(t.token_id);
    if (q.size() > kMaxQueryTokens) q.resize(kMaxQueryTokens);
    if (max_seq_len < q.size() + 3 + doc_stride + 1) {
      throw InvalidArgument("max_seq_len " + std::to_string(max_seq_len) + " leaves no context window beyond doc_stride " +
                            std::to_string(doc_stride));
    }
    const std::size_t max_ctx = max_seq_len - q.size() - 3;
    const auto ctx = tokenize(ex.context, vocab);

    std::ptrdiff_t tok_start = -1, tok_end = -1;
    if (!ex.answers.empty()) {
      const auto& a = ex.answers.front();
      const std::size_t ab = text::byte_offset_of_codepoint(ex.context, a.answer_start);
      const std::size_t ae = ab + a.text.size();
      if (a.text.empty() || ae > ex.context.size() || ex.context.compare(ab, a.text.size(), a.text) != 0) {
        ++out.dropped;
        continue;
      }
      for (std::size_t i = 0; i < ctx.size(); ++i) {
        if (tok_start < 0 && ctx[i].byte_end > ab) tok_start = static_cast<std::ptrdiff_t>(i);
        if (ctx[i].byte_begin < ae) tok_end = static_cast<std::ptrdiff_t>(i);
      }
      if (tok_start < 0 || tok_end < tok_start) {
        ++out.dropped;
        continue;
      }
    }

    const std::size_t step = max_ctx - doc_stride;
    std::size_t start = 0;
    while (true) {
      const std::size_t len = std::min(max_ctx, ctx.size() - start);
      QaFeature f;
      f.example = e;
      f.input_ids.push_back(vocab.cls_id());
      f.input_ids.insert(f.input_ids.end(), q.begin(), q.end());
      f.input_ids.push_back(vocab.sep_id());
      f.context_start = f.input_ids.size();
      for (std::size_t i = start; i < start + len; ++i) {
        f.input_ids.push_back(ctx[i].token_id);
        f.context_bytes.emplace_back(ctx[i].byte_begin, ctx[i].byte_end);
      }
      f.input_ids.push_back(vocab.sep_id());
      f.segment_ids.assign(f.context_start, 0);
      f.segment_ids.resize(f.input_ids.size(), 1);
      if (tok_start >= static_cast<std::ptrdiff_t>(start) && tok_end < static_cast<std::ptrdiff_t>(start + len)) {
        f.start_position = static_cast<std::int32_t>(f.context_start + static_cast<std::size_t>(tok_start) - start);
        f.end_position = static_cast<std::int32_t>(f.context_start + static_cast<std::size_t>(tok_end) - start);
      }
      out.features.push_back(std::move(f));
      if (start + len >= ctx.size()) break;
      start += step;
    }
  }
  return out;
}

std::vector<std::vector<std::string>> decode_qa(const TaskDataset& dataset, std::span<const QaFeature> features,
                                                std::span<const std::vector<float>> start_logits,
                                                std::span<const std::vector<float>> end_logits, std::size_t n) {
  if (features.size() != start_logits.size() || features.size() != end_logits.size()) {
    throw InvalidArgument("one start and end logit vector per feature expected");
  }
  struct Candidate {
    float score;
    std::string text;
  };
  std::vector<std::vector<Candidate>> per_example(dataset.qa.size());
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& feat = features[f];
    const auto& sl = start_logits[f];
    const auto& el = end_logits[f];
    if (sl.size() != feat.input_ids.size() || el.size() != feat.input_ids.size()) {
      throw ShapeError("QA logits do not match feature length");
    }
    const std::string& context = dataset.qa[feat.example].context;
    const std::size_t m = feat.context_bytes.size();
    for (std::size_t s = 0; s < m; ++s) {
      for (std::size_t e = s; e < std::min(m, s + kMaxAnswerTokens); ++e) {
        const std::size_t b = feat.context_bytes[s].first;
        const std::size_t t = feat.context_bytes[e].second;
        per_example[feat.example].push_back(
            {sl[feat.context_start + s] + el[feat.context_start + e], context.substr(b, t - b)});
      }
    }
  }
  std::vector<std::vector<std::string>> out(dataset.qa.size());
  for (std::size_t e = 0; e < per_example.size(); ++e) {
    auto& cands = per_example[e];
    std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    std::set<std::string> seen;
    for (const auto& c : cands) {
      if (out[e].size() >= n) break;
      if (seen.insert(text::normalize_whitespace(c.text)).second) out[e].push_back(c.text);
    }
  }
  return out;
}

namespace {

struct LexEntry {
  const char* form;
  const char* tag;
};

constexpr LexEntry kGenes[] = {{"BRCA1", "B-GENE"}, {"EGFR", "B-GENE"}, {"TP53", "B-GENE"}, {"KRAS", "B-GENE"},
                               {"PTEN", "B-GENE"},  {"MYC", "B-GENE"},  {"ALK", "B-GENE"},  {"BRAF", "B-GENE"}};
constexpr const char* kDiseaseHeads[] = {"breast", "lung", "colon", "renal", "gastric"};
constexpr const char* kDiseaseTails[] = {"carcinoma", "adenoma", "sarcoma"};
constexpr const char* kSingleDiseases[] = {"leukemia", "melanoma", "glioma"};
constexpr const char* kChemicals[] = {"cisplatin", "gefitinib", "erlotinib", "tamoxifen"};
constexpr const char* kOpeners[] = {"Patients", "Tumors", "Cells", "Samples"};
constexpr const char* kFillers[] = {"with", "showed", "mutations", "in", "and", "expression", "of", "was",
                                    "increased", "reduced", "treated", "by", "the", "cells", "after", "levels"};

template <std::size_t N>
const char* pick(const char* const (&arr)[N], Rng& rng) {
  return arr[rng.below(N)];
}

}  // namespace

TaskDataset make_toy_ner(std::size_t sentences, std::uint64_t seed) {
  TaskDataset ds;
  ds.kind = TaskKind::kNer;
  Rng rng(seed);
  for (std::size_t s = 0; s < sentences; ++s) {
    NerSentence sent;
    sent.line = s + 1;
    auto add = [&](const std::string& w, const std::string& t) {
      sent.words.push_back(w);
      sent.tags.push_back(t);
    };
    add(pick(kOpeners, rng), "O");
    const std::size_t slots = 5 + rng.below(7);
    for (std::size_t k = 0; k < slots; ++k) {
      const double r = rng.uniform();
      if (r < 0.55) {
        add(pick(kFillers, rng), "O");
      } else if (r < 0.72) {
        const auto& g = kGenes[rng.below(std::size(kGenes))];
        add(g.form, g.tag);
      } else if (r < 0.84) {
        add(pick(kDiseaseHeads, rng), "B-DISEASE");
        add(pick(kDiseaseTails, rng), "I-DISEASE");
      } else if (r < 0.92) {
        add(pick(kSingleDiseases, rng), "B-DISEASE");
      } else {
        add(pick(kChemicals, rng), "B-CHEMICAL");
      }
    }
    add(".", "O");
    ds.ner.push_back(std::move(sent));
  }
  return ds;
}

TaskDataset make_toy_qa(std::size_t examples, std::uint64_t seed) {
  static constexpr const char* kTargets[] = {"AKT1", "MTOR", "STAT3", "JAK2", "CDK4", "VEGFA", "ERBB2", "NOTCH1"};
  static constexpr const char* kTissues[] = {"liver", "lung", "kidney", "brain", "skin"};
  TaskDataset ds;
  ds.kind = TaskKind::kQa;
  Rng rng(seed);
  for (std::size_t e = 0; e < examples; ++e) {
    std::vector<std::size_t> genes(std::size(kGenes));
    for (std::size_t i = 0; i < genes.size(); ++i) genes[i] = i;
    rng.shuffle(std::span<std::size_t>(genes));
    const std::size_t facts = 2 + rng.below(3);
    const std::size_t asked = rng.below(facts);
    QaExample ex;
    ex.id = "toy-qa-" + std::to_string(e);
    for (std::size_t k = 0; k < facts; ++k) {
      const std::string gene = kGenes[genes[k]].form;
      const std::string target = kTargets[rng.below(std::size(kTargets))];
      if (!ex.context.empty()) ex.context += " ";
      const std::string prefix = gene + " activates ";
      if (k == asked) {
        ex.question = "What does " + gene + " activate?";
        ex.answers.push_back({target, text::decode_utf8(ex.context + prefix).size()});
      }
      ex.context += prefix + target + " in " + kTissues[rng.below(std::size(kTissues))] + " cells.";
    }
    ds.qa.push_back(std::move(ex));
  }
  return ds;
}

std::string toy_corpus_text(const TaskDataset& dataset, std::size_t sentences_per_doc) {
  if (sentences_per_doc == 0) throw InvalidArgument("sentences_per_doc must be positive");
  std::vector<std::string> sentences;
  if (dataset.kind == TaskKind::kNer) {
    for (const auto& s : dataset.ner) {
      std::string line;
      for (std::size_t i = 0; i < s.words.size(); ++i) line += (i ? " " : "") + s.words[i];
      sentences.push_back(std::move(line));
    }
  } else if (dataset.kind == TaskKind::kQa) {
    for (const auto& ex : dataset.qa) sentences.push_back(ex.context + " " + ex.question);
  } else {
    for (const auto& ex : dataset.text) sentences.push_back(ex.text);
  }
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i && i % sentences_per_doc == 0) out += "\n";
    out += sentences[i] + "\n";
  }
  return out;
}

}  // namespace forge
