#include "dictattach/decode.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>
#include "json.hpp"

namespace dictattach {

namespace {

template <typename T>
size_t StepLimit(const Transformer<T>& model, const DecodeOptions& options) {
  const size_t limit = model.config().max_length;
  return options.max_length == 0 ? limit : std::min(limit, options.max_length);
}

template <typename T>
struct Beam {
  typename Transformer<T>::DecodeSession::State state;
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  RowVector<T> next;  // log-probs of the following token
};

}  // namespace

template <typename T>
DecodeResult Decode(const Transformer<T>& model, const EncodedSequence<T>& source,
                    const DecodeOptions& options) {
  if (options.beam == 0) throw std::invalid_argument("beam must be at least 1");
  const typename Transformer<T>::DecodeSession session(model, source);
  const size_t limit = StepLimit(model, options);

  std::vector<Beam<T>> live(1);
  live[0].state = session.Start();
  live[0].next = session.Step(&live[0].state, Vocabulary::kBos);
  std::vector<DecodeResult> finished;

  for (size_t step = 1; step <= limit && !live.empty(); ++step) {
    struct Candidate {
      double log_prob;
      size_t parent;
      TokenId token;
    };
    std::vector<Candidate> candidates;
    for (size_t b = 0; b < live.size(); ++b) {
      const RowVector<T>& next = live[b].next;
      // Only the top `beam` tokens of each parent can survive.
      std::vector<TokenId> ids(static_cast<size_t>(next.size()));
      for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<TokenId>(i);
      const size_t keep = std::min(options.beam, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(keep), ids.end(),
                        [&](TokenId a, TokenId c) {
                          return next(a) > next(c) || (next(a) == next(c) && a < c);
                        });
      for (size_t i = 0; i < keep; ++i) {
        candidates.push_back(
            {live[b].log_prob + static_cast<double>(next(ids[i])), b, ids[i]});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       return a.log_prob > b.log_prob;
                     });
    std::vector<Beam<T>> survivors;
    for (const Candidate& c : candidates) {
      if (survivors.size() + finished.size() >= options.beam) break;
      const Beam<T>& parent = live[c.parent];
      if (c.token == Vocabulary::kEos) {
        DecodeResult done;
        done.tokens = parent.tokens;
        done.log_prob = c.log_prob;
        done.length = step;
        done.finished = true;
        finished.push_back(std::move(done));
        continue;
      }
      Beam<T> child;
      child.tokens = parent.tokens;
      child.tokens.push_back(c.token);
      child.log_prob = c.log_prob;
      child.state = parent.state;
      if (step < limit) child.next = session.Step(&child.state, c.token);
      survivors.push_back(std::move(child));
    }
    live = std::move(survivors);
    if (finished.size() >= options.beam) break;
  }
  for (const auto& beam : live) {
    DecodeResult partial;
    partial.tokens = beam.tokens;
    partial.log_prob = beam.log_prob;
    partial.length = beam.tokens.size();
    finished.push_back(std::move(partial));
  }
  const auto best = std::max_element(
      finished.begin(), finished.end(),
      [](const DecodeResult& a, const DecodeResult& b) { return a.score() < b.score(); });
  DecodeResult result = *best;
  if (options.record_attention) {
    result.attention =
        ScoreOutput(model, source, result.tokens, result.finished, true).attention;
  }
  return result;
}

template <typename T>
DecodeResult ScoreOutput(const Transformer<T>& model, const EncodedSequence<T>& source,
                         const std::vector<TokenId>& tokens, bool finished,
                         bool record_attention) {
  const typename Transformer<T>::DecodeSession session(model, source);
  auto state = session.Start();
  DecodeResult result;
  result.tokens = tokens;
  result.finished = finished;
  AttentionRecord record;
  const size_t layers = model.config().decoder_layers;
  const size_t heads = model.config().heads;
  const size_t steps = tokens.size() + (finished ? 1 : 0);
  if (record_attention) {
    record.weights.assign(layers, std::vector<Matrix<double>>(
                                      heads, Matrix<double>(steps, session.source_rows())));
  }
  std::vector<std::vector<RowVector<T>>> cross;
  TokenId input = Vocabulary::kBos;
  for (size_t t = 0; t < steps; ++t) {
    const RowVector<T> log_probs =
        session.Step(&state, input, record_attention ? &cross : nullptr);
    const TokenId output = t < tokens.size() ? tokens[t] : Vocabulary::kEos;
    result.log_prob += static_cast<double>(log_probs(output));
    if (record_attention) {
      for (size_t l = 0; l < layers; ++l) {
        for (size_t h = 0; h < heads; ++h) {
          record.weights[l][h].row(static_cast<Eigen::Index>(t)) =
              cross[l][h].template cast<double>();
        }
      }
    }
    input = output;
  }
  result.length = steps;
  if (record_attention) result.attention = std::move(record);
  return result;
}

std::vector<std::string> SourceRowLabels(const std::vector<RowProvenance>& provenance,
                                         const Vocabulary& vocab) {
  std::vector<std::string> labels;
  for (const auto& row : provenance) {
    if (row.is_definition()) {
      labels.push_back(fmt::format("{}/{}:{}", vocab.TokenOf(row.anchor), row.definition_pos,
                                   vocab.TokenOf(row.token)));
    } else {
      labels.push_back(vocab.TokenOf(row.anchor));
    }
  }
  return labels;
}

std::string AttentionToJson(const AttentionRecord& record) {
  nlohmann::ordered_json out;
  out["source"] = record.source_labels;
  out["target"] = record.target_labels;
  auto layers = nlohmann::json::array();
  for (const auto& layer : record.weights) {
    auto heads = nlohmann::json::array();
    for (const auto& matrix : layer) {
      auto rows = nlohmann::json::array();
      for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        rows.push_back(std::vector<double>(matrix.row(r).data(),
                                           matrix.row(r).data() + matrix.cols()));
      }
      heads.push_back(std::move(rows));
    }
    layers.push_back(std::move(heads));
  }
  out["layers"] = std::move(layers);
  return out.dump();
}

AttentionRecord AttentionFromJson(const std::string& json) {
  const auto in = nlohmann::json::parse(json);
  AttentionRecord record;
  record.source_labels = in.at("source").get<std::vector<std::string>>();
  record.target_labels = in.at("target").get<std::vector<std::string>>();
  for (const auto& layer : in.at("layers")) {
    record.weights.emplace_back();
    for (const auto& head : layer) {
      const auto rows = head.get<std::vector<std::vector<double>>>();
      Matrix<double> matrix(rows.size(), rows.empty() ? 0 : rows[0].size());
      for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != static_cast<size_t>(matrix.cols())) {
          throw std::invalid_argument("ragged attention matrix");
        }
        for (size_t c = 0; c < rows[r].size(); ++c) matrix(r, c) = rows[r][c];
      }
      record.weights.back().push_back(std::move(matrix));
    }
  }
  return record;
}

namespace {

std::string EscapeXml(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string AttentionToSvg(const AttentionRecord& record, size_t layer, int head) {
  if (layer >= record.weights.size()) throw std::out_of_range("no such layer");
  const auto& heads = record.weights[layer];
  if (heads.empty()) throw std::invalid_argument("empty attention record");
  Matrix<double> matrix;
  if (head < 0) {
    matrix = Matrix<double>::Zero(heads[0].rows(), heads[0].cols());
    for (const auto& h : heads) matrix += h;
    matrix /= static_cast<double>(heads.size());
  } else {
    if (static_cast<size_t>(head) >= heads.size()) throw std::out_of_range("no such head");
    matrix = heads[static_cast<size_t>(head)];
  }
  constexpr int kCell = 24;
  constexpr int kMargin = 140;
  const int width = kMargin + kCell * static_cast<int>(matrix.cols()) + 10;
  const int height = kMargin + kCell * static_cast<int>(matrix.rows()) + 10;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n",
      width, height);
  for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
    const std::string label = static_cast<size_t>(c) < record.source_labels.size()
                                  ? record.source_labels[c]
                                  : std::to_string(c);
    const int x = kMargin + kCell * static_cast<int>(c) + kCell / 2;
    svg += fmt::format(
        "<text x=\"{}\" y=\"{}\" transform=\"rotate(-60 {} {})\">{}</text>\n", x,
        kMargin - 4, x, kMargin - 4, EscapeXml(label));
  }
  for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
    const std::string label = static_cast<size_t>(r) < record.target_labels.size()
                                  ? record.target_labels[r]
                                  : std::to_string(r);
    const int y = kMargin + kCell * static_cast<int>(r);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                       kMargin - 4, y + kCell * 2 / 3, EscapeXml(label));
    for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
      const int shade = 255 - static_cast<int>(std::lround(
                                  255.0 * std::clamp(matrix(r, c), 0.0, 1.0)));
      svg += fmt::format(
          "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"rgb({},{},{})\"/>\n",
          kMargin + kCell * static_cast<int>(c), y, kCell, kCell, shade, shade, shade);
    }
  }
  svg += "</svg>\n";
  return svg;
}

template DecodeResult Decode<float>(const Transformer<float>&, const EncodedSequence<float>&,
                                    const DecodeOptions&);
template DecodeResult Decode<double>(const Transformer<double>&,
                                     const EncodedSequence<double>&, const DecodeOptions&);
template DecodeResult ScoreOutput<float>(const Transformer<float>&,
                                         const EncodedSequence<float>&,
                                         const std::vector<TokenId>&, bool, bool);
template DecodeResult ScoreOutput<double>(const Transformer<double>&,
                                          const EncodedSequence<double>&,
                                          const std::vector<TokenId>&, bool, bool);

}  // namespace dictattach
