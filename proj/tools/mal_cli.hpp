// Copyright 2026 The malsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mal/mal.hpp"

namespace mal::cli {

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Writes `path` through `path.tmp`; nothing is left behind on failure.
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + tmp);
    out << content;
    if (!out.flush()) {
      std::filesystem::remove(tmp);
      throw Error("cannot write file: " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

inline void save_checkpoint_atomic(const std::string& path, const std::vector<CheckpointEntry>& entries) {
  try {
    save_checkpoint_file(path, entries);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(path + ".tmp", ec);
    throw;
  }
}

inline std::string quote(const std::string& s) {
  if (!s.empty() && s.find_first_of(" \t\"'\\") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') q.push_back('\\');
    q.push_back(c);
  }
  return q + "\"";
}

// Shortest text that reads back as the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// Effective-configuration line, parseable by the same subcommand.
class FlagLine {
 public:
  explicit FlagLine(std::string cmd) : line_("mal " + std::move(cmd)) {}
  FlagLine& opt(const std::string& name, const std::string& value) {
    if (!value.empty()) line_ += " --" + name + " " + quote(value);
    return *this;
  }
  FlagLine& opt(const std::string& name, std::size_t v) { return opt(name, std::to_string(v)); }
  FlagLine& opt(const std::string& name, double v) { return opt(name, format_double(v)); }
  FlagLine& flag(const std::string& name, bool on) {
    if (on) line_ += " --" + name;
    return *this;
  }
  const std::string& str() const { return line_; }

 private:
  std::string line_;
};

inline void require_damping(double d) {
  if (!(d > 0.0 && d < 1.0)) throw Error("--damping must lie strictly between 0 and 1");
}

inline std::string join(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    parts.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace detail

struct PrepareArgs {
  std::string corpus, stopwords, vocab, mode = "word";
  std::size_t vocab_size = 30000, min_count = 1, max_src_len = 0, max_tgt_len = 0;
};

struct TrainArgs {
  std::string corpus, vocab, stopwords, checkpoint, loss_log, mode = "word";
  std::size_t epochs = 10, k_e = 64, k_h = 64, max_src_len = 0, max_tgt_len = 0, checkpoint_interval = 0;
  std::uint64_t seed = 1;
  double damping = kDefaultDamping, clip = 5.0;
  bool no_suatt = false, no_unatt = false, no_salience_loss = false, no_shuffle = false;
  bool tie_embeddings = false, stop_cs_gradient = false, plain_seq2seq = false;
};

struct DecodeArgs {
  std::string checkpoint, vocab, stopwords, input, output, mode = "word";
  std::size_t beam = 10, max_len = 0, max_src_len = 0;
};

struct EvaluateArgs {
  std::string candidates, references, output, mode = "word";
};

struct SalienceArgs {
  std::string checkpoint, vocab, stopwords, input, output, references, which = "suatt", mode = "word";
  std::size_t k = 10, max_src_len = 0;
};

inline LengthLimits limits_for(const std::string& mode, std::size_t max_src, std::size_t max_tgt) {
  auto lim = LengthLimits::defaults(parse_token_mode(mode));
  if (max_src) lim.max_src_len = max_src;
  if (max_tgt) lim.max_tgt_len = max_tgt;
  return lim;
}

inline int cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  const auto mode = parse_token_mode(a.mode);
  const auto lim = limits_for(a.mode, a.max_src_len, a.max_tgt_len);
  err << detail::FlagLine("prepare")
             .opt("corpus", a.corpus)
             .opt("stopwords", a.stopwords)
             .opt("vocab", a.vocab)
             .opt("vocab-size", a.vocab_size)
             .opt("min-count", a.min_count)
             .opt("mode", a.mode)
             .opt("max-src-len", lim.max_src_len)
             .opt("max-tgt-len", lim.max_tgt_len)
             .str()
      << '\n';
  const auto records = read_corpus(a.corpus);
  const auto stop = a.stopwords.empty() ? StopwordSet{} : StopwordSet::load(a.stopwords);
  std::vector<std::vector<std::string>> seqs;
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> tokenized;
  for (const auto& r : records) {
    tokenized.emplace_back(tokenize(r.source, mode), tokenize(r.summary, mode));
    seqs.push_back(tokenized.back().first);
    seqs.push_back(tokenized.back().second);
  }
  const auto vocab = Vocabulary::build(seqs, a.vocab_size, a.min_count);
  std::size_t pairs = 0, positives = 0, positions = 0;
  for (const auto& [src, sum] : tokenized) {
    auto p = encode_pair(src, sum, vocab, stop, lim);
    if (!p) continue;
    ++pairs;
    positions += p->salience_labels.size();
    for (int l : p->salience_labels) positives += static_cast<std::size_t>(l);
  }
  std::ostringstream vs;
  vocab.save(vs);
  detail::write_atomic(a.vocab, vs.str());
  const double rate = positions ? static_cast<double>(positives) / static_cast<double>(positions) : 0.0;
  out << "records: " << records.size() << '\n'
      << "pairs: " << pairs << '\n'
      << "vocabulary: " << vocab.size() << '\n'
      << "positive labels: " << positives << " / " << positions << " (" << std::setprecision(6) << rate << ")\n";
  return 0;
}

inline std::vector<TrainingPair> load_pairs(const std::string& corpus, const Vocabulary& vocab,
                                            const StopwordSet& stop, TokenMode mode, const LengthLimits& lim) {
  std::vector<TrainingPair> pairs;
  for (const auto& r : read_corpus(corpus)) {
    if (auto p = encode_pair(tokenize(r.source, mode), tokenize(r.summary, mode), vocab, stop, lim)) {
      pairs.push_back(std::move(*p));
    }
  }
  return pairs;
}

/// Switches implied by the train flags. --no-suatt drops both c_s and the
/// salience loss; --no-salience-loss keeps c_s but trains it only through
/// the generation loss.
inline Switches switches_for(const TrainArgs& a) {
  Switches sw;
  sw.use_cs = !a.plain_seq2seq && !a.no_suatt;
  sw.salience_loss = sw.use_cs && !a.no_salience_loss;
  sw.use_cu = !a.plain_seq2seq && !a.no_unatt;
  sw.stop_cs_gradient = a.stop_cs_gradient;
  sw.damping = a.damping;
  return sw;
}

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  detail::require_damping(a.damping);
  if (!(a.clip > 0.0)) throw Error("--clip must be positive");
  const auto mode = parse_token_mode(a.mode);
  const auto lim = limits_for(a.mode, a.max_src_len, a.max_tgt_len);
  err << detail::FlagLine("train")
             .opt("corpus", a.corpus)
             .opt("vocab", a.vocab)
             .opt("stopwords", a.stopwords)
             .opt("checkpoint", a.checkpoint)
             .opt("loss-log", a.loss_log)
             .opt("epochs", a.epochs)
             .opt("seed", std::to_string(a.seed))
             .opt("k-e", a.k_e)
             .opt("k-h", a.k_h)
             .opt("max-src-len", lim.max_src_len)
             .opt("max-tgt-len", lim.max_tgt_len)
             .opt("mode", a.mode)
             .opt("damping", a.damping)
             .opt("clip", a.clip)
             .opt("checkpoint-interval", a.checkpoint_interval)
             .flag("no-suatt", a.no_suatt)
             .flag("no-unatt", a.no_unatt)
             .flag("no-salience-loss", a.no_salience_loss)
             .flag("no-shuffle", a.no_shuffle)
             .flag("tie-embeddings", a.tie_embeddings)
             .flag("stop-cs-gradient", a.stop_cs_gradient)
             .flag("plain-seq2seq", a.plain_seq2seq)
             .str()
      << '\n';
  const auto vocab = Vocabulary::load(a.vocab);
  const auto stop = a.stopwords.empty() ? StopwordSet{} : StopwordSet::load(a.stopwords);
  const auto pairs = load_pairs(a.corpus, vocab, stop, mode, lim);

  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.k_e = a.k_e;
  mc.k_h = a.k_h;
  mc.supervised_branch = !a.plain_seq2seq;
  mc.graph_branch = !a.plain_seq2seq;
  mc.tie_embeddings = a.tie_embeddings;
  mc.seed = a.seed;
  MalModel<float> model(mc);

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.seed = a.seed;
  tc.shuffle = !a.no_shuffle;
  tc.switches = switches_for(a);
  tc.clip_norm = a.clip;
  tc.checkpoint_interval = a.checkpoint_interval;

  auto save = [&] {
    auto entries = snapshot(model.params());
    entries.push_back(switches_entry(tc.switches));
    detail::save_checkpoint_atomic(a.checkpoint, entries);
  };

  std::ostringstream log;
  if (a.epochs > 0) {
    if (pairs.empty()) throw EmptyInputError("train: corpus has no usable pairs");
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochLoss& e) {
      write_loss_line(log, e);
      write_loss_line(out, e);
      return true;
    };
    hooks.on_checkpoint = [&](std::size_t) { save(); };
    train(model, pairs, tc, hooks);
  }
  save();
  if (!a.loss_log.empty()) detail::write_atomic(a.loss_log, log.str());
  if (!pairs.empty()) {
    out << "per-token NLL: " << std::setprecision(9) << per_token_nll(model, pairs, tc.switches) << '\n';
  }
  return 0;
}

struct LoadedModel {
  MalModel<float> model;
  Switches switches;
  Vocabulary vocab;
  StopwordSet stopwords;
};

inline LoadedModel load_model(const std::string& checkpoint, const std::string& vocab_path,
                              const std::string& stopwords) {
  const auto entries = load_checkpoint_file(checkpoint);
  auto vocab = Vocabulary::load(vocab_path);
  auto cfg = infer_config(entries);
  if (cfg.vocab_size != vocab.size()) {
    throw FormatError("checkpoint vocabulary size " + std::to_string(cfg.vocab_size) + " differs from " +
                      vocab_path + " (" + std::to_string(vocab.size()) + ")");
  }
  return {model_from_checkpoint<float>(entries), stored_switches(entries), std::move(vocab),
          stopwords.empty() ? StopwordSet{} : StopwordSet::load(stopwords)};
}

inline int cmd_decode(const DecodeArgs& a, std::ostream&, std::ostream& err) {
  if (a.beam < 1) throw Error("--beam must be at least 1");
  const auto mode = parse_token_mode(a.mode);
  const auto lim = limits_for(a.mode, a.max_src_len, a.max_len);
  err << detail::FlagLine("decode")
             .opt("checkpoint", a.checkpoint)
             .opt("vocab", a.vocab)
             .opt("stopwords", a.stopwords)
             .opt("input", a.input)
             .opt("output", a.output)
             .opt("beam", a.beam)
             .opt("max-len", lim.max_tgt_len)
             .opt("max-src-len", lim.max_src_len)
             .opt("mode", a.mode)
             .str()
      << '\n';
  const auto lm = load_model(a.checkpoint, a.vocab, a.stopwords);
  std::string result;
  for (const auto& line : detail::read_lines(a.input)) {
    auto toks = tokenize(line, mode);
    if (toks.size() > lim.max_src_len) toks.resize(lim.max_src_len);
    if (!toks.empty()) {
      auto gen = lm.model.generate(to_ids(toks, lm.vocab), content_mask(toks, lm.stopwords), lm.switches, a.beam,
                                   lim.max_tgt_len);
      std::vector<std::string> words;
      for (int id : gen.tokens) words.push_back(lm.vocab.token(id));
      result += detail::join(words);
    }
    result.push_back('\n');
  }
  detail::write_atomic(a.output, result);
  return 0;
}

inline void write_score(std::ostream& o, const char* name, const RougeScore& s) {
  o << name << '\t' << s.precision << '\t' << s.recall << '\t' << s.f1 << '\n';
}

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  const auto mode = parse_token_mode(a.mode);
  err << detail::FlagLine("evaluate")
             .opt("candidates", a.candidates)
             .opt("references", a.references)
             .opt("output", a.output)
             .opt("mode", a.mode)
             .str()
      << '\n';
  const auto cands = detail::read_lines(a.candidates);
  const auto refs = detail::read_lines(a.references);
  if (cands.size() != refs.size()) {
    throw Error("evaluate: " + std::to_string(cands.size()) + " candidates but " + std::to_string(refs.size()) +
                " reference lines");
  }
  std::ostringstream rep;
  rep << std::setprecision(9);
  RougeReport mean{};
  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::vector<Tokens> rs;
    for (const auto& r : detail::split_tabs(refs[i])) rs.push_back(tokenize(r, mode));
    const auto s = rouge_all(tokenize(cands[i], mode), rs);
    rep << "# example " << i + 1 << '\n';
    write_score(rep, "ROUGE-1", s.r1);
    write_score(rep, "ROUGE-2", s.r2);
    write_score(rep, "ROUGE-L", s.rl);
    for (auto [m, v] : {std::pair{&mean.r1, &s.r1}, {&mean.r2, &s.r2}, {&mean.rl, &s.rl}}) {
      m->precision += v->precision;
      m->recall += v->recall;
      m->f1 += v->f1;
    }
  }
  const double n = cands.empty() ? 1.0 : static_cast<double>(cands.size());
  for (auto* m : {&mean.r1, &mean.r2, &mean.rl}) {
    m->precision /= n;
    m->recall /= n;
    m->f1 /= n;
  }
  rep << "# mean\n";
  write_score(rep, "ROUGE-1", mean.r1);
  write_score(rep, "ROUGE-2", mean.r2);
  write_score(rep, "ROUGE-L", mean.rl);
  if (a.output.empty()) {
    out << rep.str();
  } else {
    detail::write_atomic(a.output, rep.str());
  }
  return 0;
}

inline int cmd_salience(const SalienceArgs& a, std::ostream& out, std::ostream& err) {
  if (a.k < 1) throw Error("--k must be at least 1");
  if (a.which != "suatt" && a.which != "unatt") throw Error("--which must be suatt or unatt");
  const auto mode = parse_token_mode(a.mode);
  const auto lim = limits_for(a.mode, a.max_src_len, 0);
  err << detail::FlagLine("salience")
             .opt("checkpoint", a.checkpoint)
             .opt("vocab", a.vocab)
             .opt("stopwords", a.stopwords)
             .opt("input", a.input)
             .opt("output", a.output)
             .opt("references", a.references)
             .opt("k", a.k)
             .opt("which", a.which)
             .opt("max-src-len", lim.max_src_len)
             .opt("mode", a.mode)
             .str()
      << '\n';
  const auto lm = load_model(a.checkpoint, a.vocab, a.stopwords);
  const auto which = a.which == "suatt" ? SalienceSource::supervised : SalienceSource::unsupervised;
  const auto lines = detail::read_lines(a.input);
  std::vector<std::string> refs;
  if (!a.references.empty()) {
    refs = detail::read_lines(a.references);
    if (refs.size() != lines.size()) throw Error("salience: input and reference line counts differ");
  }
  std::string result;
  double f1 = 0.0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto toks = tokenize(lines[i], mode);
    if (toks.size() > lim.max_src_len) toks.resize(lim.max_src_len);
    Tokens top;
    if (!toks.empty()) {
      auto att = salience_attention(lm.model, to_ids(toks, lm.vocab), content_mask(toks, lm.stopwords), which,
                                    lm.switches.damping);
      top = top_k_salient(att, toks, a.k);
    }
    result += detail::join(top) + '\n';
    if (!refs.empty()) {
      std::vector<Tokens> rs;
      for (const auto& r : detail::split_tabs(refs[i])) rs.push_back(tokenize(r, mode));
      f1 += rouge_n(top, rs, 1).f1;
    }
  }
  if (a.output.empty()) {
    out << result;
  } else {
    detail::write_atomic(a.output, result);
  }
  if (!refs.empty()) {
    out << "mean ROUGE-1 F1: " << std::setprecision(9) << (lines.empty() ? 0.0 : f1 / static_cast<double>(lines.size()))
        << '\n';
  }
  return 0;
}

/// Entry point shared by the executable and the tests. Returns the process
/// exit code: 0 on success, 2 for a malformed corpus line, 1 for other errors.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Salience-guided abstractive summarization", "mal"};
  app.require_subcommand(1);
  const std::vector<std::string> modes{"word", "char"};

  PrepareArgs pa;
  auto* prep = app.add_subcommand("prepare", "Build the vocabulary and report label statistics");
  prep->add_option("--corpus", pa.corpus, "source<TAB>summary file")->required();
  prep->add_option("--stopwords", pa.stopwords, "stopword list, one or more per line");
  prep->add_option("--vocab", pa.vocab, "vocabulary output")->required();
  prep->add_option("--vocab-size", pa.vocab_size, "maximum ids including reserved");
  prep->add_option("--min-count", pa.min_count);
  prep->add_option("--mode", pa.mode)->check(CLI::IsMember(modes));
  prep->add_option("--max-src-len", pa.max_src_len);
  prep->add_option("--max-tgt-len", pa.max_tgt_len);

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--corpus", ta.corpus)->required();
  tr->add_option("--vocab", ta.vocab)->required();
  tr->add_option("--stopwords", ta.stopwords);
  tr->add_option("--checkpoint", ta.checkpoint)->required();
  tr->add_option("--loss-log", ta.loss_log);
  tr->add_option("--epochs", ta.epochs);
  tr->add_option("--seed", ta.seed);
  tr->add_option("--k-e", ta.k_e)->check(CLI::PositiveNumber);
  tr->add_option("--k-h", ta.k_h)->check(CLI::PositiveNumber);
  tr->add_option("--max-src-len", ta.max_src_len);
  tr->add_option("--max-tgt-len", ta.max_tgt_len);
  tr->add_option("--mode", ta.mode)->check(CLI::IsMember(modes));
  tr->add_option("--damping", ta.damping);
  tr->add_option("--clip", ta.clip);
  tr->add_option("--checkpoint-interval", ta.checkpoint_interval, "epochs between checkpoints, 0 for none");
  tr->add_flag("--no-suatt", ta.no_suatt, "drop the supervised attention context and salience loss");
  tr->add_flag("--no-unatt", ta.no_unatt, "drop the word-graph attention context");
  tr->add_flag("--no-salience-loss", ta.no_salience_loss);
  tr->add_flag("--no-shuffle", ta.no_shuffle);
  tr->add_flag("--tie-embeddings", ta.tie_embeddings);
  tr->add_flag("--stop-cs-gradient", ta.stop_cs_gradient);
  tr->add_flag("--plain-seq2seq", ta.plain_seq2seq, "build without either salience branch");

  DecodeArgs da;
  auto* dec = app.add_subcommand("decode", "Generate one summary per input line");
  dec->add_option("--checkpoint", da.checkpoint)->required();
  dec->add_option("--vocab", da.vocab)->required();
  dec->add_option("--stopwords", da.stopwords);
  dec->add_option("--input", da.input)->required();
  dec->add_option("--output", da.output)->required();
  dec->add_option("--beam", da.beam);
  dec->add_option("--max-len", da.max_len, "generated tokens including the end marker");
  dec->add_option("--max-src-len", da.max_src_len);
  dec->add_option("--mode", da.mode)->check(CLI::IsMember(modes));

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "ROUGE-1/2/L against TAB-separated references");
  ev->add_option("--candidates", ea.candidates)->required();
  ev->add_option("--references", ea.references)->required();
  ev->add_option("--output", ea.output);
  ev->add_option("--mode", ea.mode)->check(CLI::IsMember(modes));

  SalienceArgs sa;
  auto* sal = app.add_subcommand("salience", "Top-k salient words per input line");
  sal->add_option("--checkpoint", sa.checkpoint)->required();
  sal->add_option("--vocab", sa.vocab)->required();
  sal->add_option("--stopwords", sa.stopwords);
  sal->add_option("--input", sa.input)->required();
  sal->add_option("--output", sa.output);
  sal->add_option("--references", sa.references);
  sal->add_option("--k", sa.k);
  sal->add_option("--which", sa.which)->check(CLI::IsMember({"suatt", "unatt"}));
  sal->add_option("--max-src-len", sa.max_src_len);
  sal->add_option("--mode", sa.mode)->check(CLI::IsMember(modes));

  std::vector<const char*> argv{"mal"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (prep->parsed()) return cmd_prepare(pa, out, err);
    if (tr->parsed()) return cmd_train(ta, out, err);
    if (dec->parsed()) return cmd_decode(da, out, err);
    if (ev->parsed()) return cmd_evaluate(ea, out, err);
    return cmd_salience(sa, out, err);
  } catch (const CorpusFormatError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mal::cli
