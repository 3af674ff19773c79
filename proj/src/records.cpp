#include "rert/records.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

namespace rert {

namespace {

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << ' ' << buf;
}

void put_all(std::ostream& out, const Vec& v) {
  for (double x : v) put(out, x);
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(const char* what) {
    std::string line;
    ++line_no_;  // an absent line is reported under the number it would have had
    if (!std::getline(in_, line)) fail(std::string("unexpected end of file, expected ") + what);
    return std::istringstream(line);
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw RecordError("line " + std::to_string(line_no_) + ": " + msg);
  }

  std::string word(std::istringstream& s) {
    std::string w;
    if (!(s >> w)) fail("missing field");
    return w;
  }

  double real(std::istringstream& s) {
    const std::string w = word(s);
    double v = 0;
    const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || p != w.data() + w.size()) fail("not a number: '" + w + "'");
    return v;
  }

  long integer(std::istringstream& s) {
    const std::string w = word(s);
    long v = 0;
    const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || p != w.data() + w.size()) fail("not an integer: '" + w + "'");
    return v;
  }

  Vec reals(std::istringstream& s, std::size_t n) {
    Vec v(n);
    for (auto& x : v) x = real(s);
    return v;
  }

  void expect_end(std::istringstream& s) {
    std::string extra;
    if (s >> extra) fail("unexpected trailing field '" + extra + "'");
  }

  /// Parses "magic K=V K=V ..." and returns the keyed integers.
  std::map<std::string, long> header(const std::string& magic,
                                     std::initializer_list<const char*> keys) {
    auto s = next("header");
    if (word(s) != magic) fail("expected a '" + magic + "' header");
    std::map<std::string, long> values;
    for (const char* key : keys) {
      const std::string w = word(s);
      const std::string prefix = std::string(key) + "=";
      if (w.rfind(prefix, 0) != 0) fail("expected " + prefix + "<n>");
      long v = 0;
      const char* b = w.data() + prefix.size();
      const auto [p, ec] = std::from_chars(b, w.data() + w.size(), v);
      if (ec != std::errc() || p != w.data() + w.size() || v < 0) fail("bad value in '" + w + "'");
      values[key] = v;
    }
    expect_end(s);
    return values;
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

template <typename F>
auto guarded(LineReader& r, F&& f) {
  try {
    return f();
  } catch (const RecordError&) {
    throw;
  } catch (const InvalidInput& e) {
    r.fail(e.what());
  }
}

}  // namespace

void write_model(std::ostream& out, const ToyMoE& model) {
  const auto& bank = model.bank;
  out << "rert-model D=" << bank.feature_dim() << " E=" << bank.expert_count()
      << " C=" << bank.class_count() << '\n';
  for (const auto& e : bank.experts()) {
    out << "expert";
    put_all(out, e.weight);
    put_all(out, e.bias);
    out << '\n';
  }
  out << "router";
  put_all(out, model.router.weight());
  put_all(out, model.router.bias());
  out << '\n';
}

ToyMoE read_model(std::istream& in) {
  LineReader r(in);
  auto h = r.header("rert-model", {"D", "E", "C"});
  const std::size_t d = h["D"], e = h["E"], c = h["C"];
  std::vector<Expert> experts;
  for (std::size_t j = 0; j < e; ++j) {
    auto s = r.next("an expert record");
    if (r.word(s) != "expert") r.fail("expected an expert record");
    Expert ex;
    ex.weight = r.reals(s, c * d);
    ex.bias = r.reals(s, c);
    r.expect_end(s);
    experts.push_back(std::move(ex));
  }
  auto s = r.next("the router record");
  if (r.word(s) != "router") r.fail("expected the router record");
  Vec w = r.reals(s, e * d);
  Vec b = r.reals(s, e);
  r.expect_end(s);
  return guarded(r, [&] {
    return ToyMoE{ExpertBank(d, c, std::move(experts)), Router(d, std::move(w), std::move(b))};
  });
}

void write_reference_set(std::ostream& out, const ReferenceSet& set, std::size_t class_count,
                         int task_types) {
  out << "rert-refset D=" << set.feature_dim() << " De=" << set.embedding_dim()
      << " E=" << set.expert_count() << " C=" << class_count << " T=" << task_types
      << " N=" << set.size() << '\n';
  for (const auto& e : set.entries()) {
    out << e.input().task_type() << ' ' << e.label().class_id;
    put_all(out, e.input().features());
    put_all(out, e.embedding().values());
    put_all(out, e.routing().values());
    out << '\n';
  }
}

ReferenceSet read_reference_set(std::istream& in, const ExpertBank& bank) {
  LineReader r(in);
  auto h = r.header("rert-refset", {"D", "De", "E", "C", "T", "N"});
  const std::size_t d = h["D"], de = h["De"], e = h["E"], n = h["N"];
  const long c = h["C"], t = h["T"];
  if (d != bank.feature_dim() || e != bank.expert_count() ||
      static_cast<std::size_t>(c) != bank.class_count()) {
    throw RecordError("line 1: dimensions do not match the model");
  }
  std::vector<ReferenceEntry> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto s = r.next("a reference record");
    const long task = r.integer(s);
    const long label = r.integer(s);
    if (task < 0 || task >= t) r.fail("task type out of range");
    if (label < 0 || label >= c) r.fail("label out of range");
    Vec features = r.reals(s, d);
    Vec embedding = r.reals(s, de);
    Vec routing = r.reals(s, e);
    r.expect_end(s);
    entries.push_back(guarded(r, [&] {
      return ReferenceEntry::verified(bank, ModelInput(std::move(features), static_cast<int>(task)),
                                      TaskEmbedding(std::move(embedding)),
                                      RoutingWeights(std::move(routing)),
                                      Label{static_cast<int>(label)});
    }));
  }
  return guarded(r, [&] { return seal(std::move(entries)); });
}

void write_split(std::ostream& out, const std::vector<Sample>& samples, int task_types) {
  const std::size_t d = samples.empty() ? 0 : samples.front().input.dim();
  const std::size_t de = samples.empty() ? 0 : samples.front().embedding.size();
  out << "rert-split D=" << d << " De=" << de << " T=" << task_types << " N=" << samples.size()
      << '\n';
  for (const auto& s : samples) {
    out << s.input.task_type() << ' ';
    if (s.label) out << s.label->class_id;
    else out << '-';
    put_all(out, s.input.features());
    put_all(out, s.embedding.values());
    out << '\n';
  }
}

std::vector<Sample> read_split(std::istream& in) {
  LineReader r(in);
  auto h = r.header("rert-split", {"D", "De", "T", "N"});
  const std::size_t d = h["D"], de = h["De"], n = h["N"];
  const long t = h["T"];
  std::vector<Sample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto s = r.next("a sample record");
    const long task = r.integer(s);
    if (task < 0 || task >= t) r.fail("task type out of range");
    std::optional<Label> label;
    {
      const auto pos = s.tellg();
      std::string w = r.word(s);
      if (w != "-") {
        s.seekg(pos);
        const long v = r.integer(s);
        if (v < 0) r.fail("negative label");
        label = Label{static_cast<int>(v)};
      }
    }
    Vec features = r.reals(s, d);
    Vec embedding = r.reals(s, de);
    r.expect_end(s);
    samples.push_back(guarded(r, [&] {
      return Sample{ModelInput(std::move(features), static_cast<int>(task)),
                    TaskEmbedding(std::move(embedding)), label};
    }));
  }
  return samples;
}

}  // namespace rert
