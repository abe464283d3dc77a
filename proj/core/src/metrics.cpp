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

#include "forge/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "forge/error.hpp"
#include "forge/text.hpp"

namespace forge {

namespace {

double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

double ratio(std::size_t num, std::size_t den) {
  return den ? 100.0 * static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

}  // namespace

std::vector<EntitySpan> bio_to_spans(std::size_t sentence, std::span<const std::string> tags) {
  std::vector<EntitySpan> out;
  bool open = false;
  EntitySpan cur;
  auto close = [&](std::size_t at) {
    if (open) {
      cur.end = at;
      out.push_back(cur);
      open = false;
    }
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& t = tags[i];
    if (t.size() > 2 && (t[0] == 'B' || t[0] == 'I') && t[1] == '-') {
      const std::string type = t.substr(2);
      if (t[0] == 'I' && open && cur.type == type) continue;
      close(i);
      cur = {sentence, type, i, i};
      open = true;
    } else {
      close(i);
    }
  }
  close(tags.size());
  return out;
}

Prf entity_f1(std::span<const EntitySpan> gold, std::span<const EntitySpan> predicted) {
  std::multiset<EntitySpan> g(gold.begin(), gold.end());
  std::size_t tp = 0;
  for (const auto& p : predicted) {
    auto it = g.find(p);
    if (it != g.end()) {
      ++tp;
      g.erase(it);
    }
  }
  Prf out;
  out.precision = ratio(tp, predicted.size());
  out.recall = ratio(tp, gold.size());
  out.f1 = f1_of(out.precision, out.recall);
  return out;
}

Prf entity_f1(std::span<const std::vector<std::string>> gold_tags,
              std::span<const std::vector<std::string>> predicted_tags) {
  if (gold_tags.size() != predicted_tags.size()) throw InvalidArgument("gold and predicted sentence counts differ");
  std::vector<EntitySpan> gold, pred;
  for (std::size_t s = 0; s < gold_tags.size(); ++s) {
    if (gold_tags[s].size() != predicted_tags[s].size()) {
      throw InvalidArgument("sentence " + std::to_string(s) + ": gold has " + std::to_string(gold_tags[s].size()) +
                            " tags, prediction has " + std::to_string(predicted_tags[s].size()));
    }
    auto gs = bio_to_spans(s, gold_tags[s]);
    auto ps = bio_to_spans(s, predicted_tags[s]);
    gold.insert(gold.end(), gs.begin(), gs.end());
    pred.insert(pred.end(), ps.begin(), ps.end());
  }
  return entity_f1(gold, pred);
}

double micro_macro_f1(std::span<const std::vector<std::string>> gold, std::span<const std::vector<std::string>> predicted,
                      std::span<const std::string> labels, F1Mode mode, bool multi_label) {
  if (gold.size() != predicted.size()) throw InvalidArgument("gold and predicted example counts differ");
  if (labels.empty()) throw InvalidArgument("empty label space");
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], i);
  auto lookup = [&](const std::string& l) {
    auto it = index.find(l);
    if (it == index.end()) throw InvalidArgument("unknown label \"" + l + "\"");
    return it->second;
  };
  std::vector<std::size_t> tp(labels.size()), fp(labels.size()), fn(labels.size());
  for (std::size_t e = 0; e < gold.size(); ++e) {
    if (!multi_label && (gold[e].size() != 1 || predicted[e].size() > 1)) {
      throw InvalidArgument("example " + std::to_string(e) + " does not carry exactly one label");
    }
    std::set<std::size_t> g, p;
    for (const auto& l : gold[e]) g.insert(lookup(l));
    for (const auto& l : predicted[e]) p.insert(lookup(l));
    for (auto l : p) (g.count(l) ? tp : fp)[l]++;
    for (auto l : g) {
      if (!p.count(l)) fn[l]++;
    }
  }
  if (mode == F1Mode::kMicro) {
    const auto TP = std::accumulate(tp.begin(), tp.end(), std::size_t{0});
    const auto FP = std::accumulate(fp.begin(), fp.end(), std::size_t{0});
    const auto FN = std::accumulate(fn.begin(), fn.end(), std::size_t{0});
    return f1_of(ratio(TP, TP + FP), ratio(TP, TP + FN));
  }
  double sum = 0;
  for (std::size_t l = 0; l < labels.size(); ++l) sum += f1_of(ratio(tp[l], tp[l] + fp[l]), ratio(tp[l], tp[l] + fn[l]));
  return sum / static_cast<double>(labels.size());
}

std::string normalize_answer(std::string_view s) {
  const auto cps = text::decode_utf8(s);
  std::size_t b = 0, e = cps.size();
  while (b < e && text::is_space(cps[b].value)) ++b;
  while (e > b && text::is_space(cps[e - 1].value)) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    char32_t c = cps[i].value;
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
    out += text::encode_utf8(c);
  }
  return out;
}

FactoidScores bioasq_factoid(std::span<const std::vector<std::string>> gold_answers,
                             std::span<const std::vector<std::string>> ranked_candidates) {
  if (gold_answers.size() != ranked_candidates.size()) throw InvalidArgument("gold and candidate question counts differ");
  FactoidScores out;
  if (gold_answers.empty()) return out;
  double strict = 0, lenient = 0, rr = 0;
  for (std::size_t q = 0; q < gold_answers.size(); ++q) {
    if (ranked_candidates[q].size() > 5) {
      throw InvalidArgument("question " + std::to_string(q) + " has more than 5 candidates");
    }
    std::set<std::string> gold;
    for (const auto& g : gold_answers[q]) gold.insert(normalize_answer(g));
    for (std::size_t r = 0; r < ranked_candidates[q].size(); ++r) {
      if (gold.count(normalize_answer(ranked_candidates[q][r]))) {
        if (r == 0) strict += 1;
        lenient += 1;
        rr += 1.0 / static_cast<double>(r + 1);
        break;
      }
    }
  }
  const double n = static_cast<double>(gold_answers.size());
  out.strict_accuracy = 100.0 * strict / n;
  out.lenient_accuracy = 100.0 * lenient / n;
  out.mrr = 100.0 * rr / n;
  return out;
}

double overall_average(double ner_average, double re_average, double dc_average, double qa_average) {
  return (ner_average * 8 + re_average * 4 + dc_average * 2 + qa_average) / 15;
}

double qa_average(std::span<const double> cells) {
  if (cells.empty()) throw InvalidArgument("no QA cells to average");
  return std::accumulate(cells.begin(), cells.end(), 0.0) / static_cast<double>(cells.size());
}

}  // namespace forge
