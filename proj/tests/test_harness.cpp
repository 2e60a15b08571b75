#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "crowd/experiment.hpp"
#include "crowd/io.hpp"

using namespace crowd;
namespace fs = std::filesystem;

namespace {

LoadedLabels parse(const std::string& text, LoadOptions options = {}) {
  std::istringstream in(text);
  return read_labels(in, options);
}

std::string fixture(const std::string& name) { return std::string(CROWD_FIXTURE_DIR) + "/" + name; }

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("crowd_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Drops the timestamp line.
std::string body(const std::string& csv) { return csv.substr(csv.find('\n') + 1); }

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("triples round trip") {
    const auto loaded = parse("worker,item,label\nann,q1,2\nbob,q1,1\nann,q2,3\n");
    CHECK(loaded.labels.num_workers() == 2);
    CHECK(loaded.labels.num_items() == 2);
    CHECK(loaded.labels.num_classes() == 3);
    CHECK(loaded.worker_ids == std::vector<std::string>{"ann", "bob"});
    CHECK(loaded.labels.label(0, 1) == 3);
    std::ostringstream out;
    write_labels(out, loaded.labels, loaded.worker_ids, loaded.item_ids, loaded.label_set);
    const auto again = parse(out.str());
    CHECK(again.labels == loaded.labels);
    CHECK(again.item_ids == loaded.item_ids);
  }

  TEST_CASE("class count inference and override") {
    CHECK(parse("worker,item,label\na,x,1\n").labels.num_classes() == 2);
    LoadOptions o;
    o.num_classes = 4;
    CHECK(parse("worker,item,label\na,x,1\n", o).labels.num_classes() == 4);
    CHECK_THROWS_AS(parse("worker,item,label\na,x,5\n", o), UnknownLabel);
  }

  TEST_CASE("binary labels") {
    LoadOptions o;
    o.binary = true;
    const auto loaded = parse("worker,item,label\na,x,1\na,y,-1\n", o);
    CHECK(loaded.labels.label(0, 0) == 1);
    CHECK(loaded.labels.label(0, 1) == 2);
    CHECK_THROWS_AS(parse("worker,item,label\na,x,2\n", o), UnknownLabel);
    std::ostringstream out;
    write_truth(out, {2, 1}, loaded.item_ids, loaded.label_set);
    CHECK(out.str() == "item,label\nx,-1\ny,1\n");
  }

  TEST_CASE("dense format") {
    LoadOptions o;
    o.format = LabelFormat::DenseCsv;
    const auto loaded = parse("worker,i1,i2,i3\nw1,1,,2\nw2,0,2,2\n", o);
    CHECK(loaded.labels.num_labels() == 4);
    CHECK(loaded.labels.label(0, 1) == 0);
    CHECK(loaded.labels.label(1, 0) == 0);
    CHECK(loaded.item_ids == std::vector<std::string>{"i1", "i2", "i3"});
    CHECK_THROWS_AS(parse("worker,i1\nw1,1\nw1,2\n", o), ParseError);
    CHECK_THROWS_AS(parse("worker,i1,i2\nw1,1\n", o), ParseError);
    CHECK(parse_label_format("dense-csv") == LabelFormat::DenseCsv);
    CHECK_THROWS_AS(parse_label_format("tsv"), DomainError);
  }

  TEST_CASE("malformed label files") {
    CHECK_THROWS_AS(parse(""), EmptyMatrix);
    CHECK_THROWS_AS(parse("worker,item,label\n"), EmptyMatrix);
    try {
      parse("worker,item,label\na,x,1\na,x,2\n");
      FAIL("expected DuplicateLabel");
    } catch (const DuplicateLabel& e) {
      CHECK(e.worker() == "a");
      CHECK(e.item() == "x");
    }
    try {
      parse("worker,item,label\na,x,1\nb,y\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse("worker,item,label\na,x,one\n"), ParseError);
    CHECK_THROWS_AS(parse("who,item,label\na,x,1\n"), ParseError);
    CHECK_THROWS_AS(parse("worker,item,label\na,x,0\n"), UnknownLabel);
    CHECK_THROWS_AS(load_labels("/nonexistent/labels.csv"), ValidationError);
  }

  TEST_CASE("truth files") {
    const auto loaded = parse("worker,item,label\na,x,1\na,y,2\n");
    std::istringstream good("item,label\ny,1\nx,2\n");
    CHECK(read_truth(good, loaded) == Predictions{2, 1});
    std::istringstream missing("item,label\nx,1\n");
    CHECK_THROWS_AS(read_truth(missing, loaded), ParseError);
    std::istringstream unknown("item,label\nx,1\ny,1\nz,2\n");
    CHECK_THROWS_AS(read_truth(unknown, loaded), ParseError);
    std::istringstream twice("item,label\nx,1\ny,1\nx,2\n");
    CHECK_THROWS_AS(read_truth(twice, loaded), DuplicateLabel);
  }

  TEST_CASE("dataset summaries") {
    const auto loaded = parse("worker,item,label\na,x,1\na,y,2\nb,x,2\nc,y,2\n");
    const Predictions truth{1, 2};
    const auto s = summarize_dataset(loaded.labels, &truth);
    CHECK(s.num_workers == 3);
    CHECK(s.num_items == 2);
    CHECK(s.num_labels == 4);
    CHECK(s.density == doctest::Approx(4.0 / 6));
    CHECK(s.labels_per_worker == std::vector<std::size_t>{2, 1, 1});
    CHECK((*s.worker_accuracy)[0] == 1.0);
    CHECK((*s.worker_accuracy)[1] == 0.0);
    CHECK(*s.mean_worker_accuracy == doctest::Approx(2.0 / 3));
    const Predictions short_truth{1};
    CHECK_THROWS_AS(summarize_dataset(loaded.labels, &short_truth), LengthMismatch);
  }

  TEST_CASE("shaped fixtures") {
    struct Shape {
      const char* name;
      bool binary;
      int l;
      int m;
      int n;
      std::size_t labels;
    };
    for (const auto& shape : {Shape{"duchenne", true, 2, 17, 159, 1221}, Shape{"rte", true, 2, 164, 800, 8000},
                              Shape{"websearch", false, 5, 177, 2665, 15539}}) {
      INFO(shape.name);
      LoadOptions o;
      o.binary = shape.binary;
      const auto loaded = load_labels(fixture(std::string(shape.name) + "_labels.csv"), o);
      const auto truth = load_truth(fixture(std::string(shape.name) + "_truth.csv"), loaded);
      const auto s = summarize_dataset(loaded.labels, &truth);
      CHECK(s.num_classes == shape.l);
      CHECK(s.num_workers == shape.m);
      CHECK(s.num_items == shape.n);
      CHECK(s.num_labels == shape.labels);
      if (shape.m == 17) CHECK(std::round(s.density * 1000) / 10 == 45.2);
      // subsampling everything changes nothing
      CHECK(summarize_dataset(subsample_labels(loaded.labels, 1.0, 3), &truth) == s);
    }
  }

  TEST_CASE("subsampling") {
    const auto loaded = load_labels(fixture("duchenne_labels.csv"), LoadOptions{LabelFormat::CsvTriples, 0, true});
    CHECK(subsample_labels(loaded.labels, 1.0, 1) == loaded.labels);
    CHECK(subsample_labels(loaded.labels, 0.0, 1).num_labels() == 0);
    const auto half = subsample_labels(loaded.labels, 0.5, 1);
    CHECK(std::abs(static_cast<double>(half.num_labels()) - 610.5) <= 4 * std::sqrt(1221 * 0.25));
    CHECK(subsample_labels(loaded.labels, 0.5, 1) == half);
    for (const auto& e : half.entries()) CHECK(loaded.labels.label(e.worker, e.item) == e.label);
    CHECK_THROWS_AS(subsample_labels(loaded.labels, 1.5, 1), DomainError);
  }

  TEST_CASE("experiment config parsing") {
    const auto c = parse_experiment_config(R"({
      "scenario": "fig3a", "workers": 31, "items": 200, "classes": 3, "q": 0.3,
      "accuracy": {"type": "beta", "a": 2.3, "b": 2},
      "methods": ["oracle-map", "iwmv", "mv"], "trials": 100, "seed": 1,
      "sweep": {"variable": "mean_accuracy", "from": 0.38, "to": 0.98, "step": 0.05}})");
    CHECK(c.grid.size() == 13);
    CHECK(format_double(c.grid[3]) == "0.53");
    CHECK(c.grid.back() == 0.98);
    CHECK(c.methods.size() == 3);
    CHECK(c.methods[0] == Method::OracleMap);
    CHECK_FALSE(c.timing);

    CHECK_THROWS_AS(parse_experiment_config(R"({"workerz": 3})"), DomainError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"methods": ["magic"]})"), DomainError);
    CHECK_THROWS_AS(parse_experiment_config("{not json"), ValidationError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"kind": "misspecified", "methods": ["oracle-map"]})"), DomainError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"sweep": {"variable": "s", "values": [0.5]}})"), DomainError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"trials": 0})"), DomainError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"workers": 3, "accuracy": {"type": "fixed", "values": [0.5]}})"),
                    DimensionMismatch);
    CHECK_THROWS_AS(parse_experiment_config(R"({"kind": "dataset", "dataset": {"labels": "x.csv"}})"), DomainError);
  }

  TEST_CASE("experiments are reproducible") {
    const auto dir = scratch_dir("repro");
    const std::string text = R"({"scenario": "small", "workers": 7, "items": 40, "classes": 3, "q": 0.6,
      "methods": ["mv", "wmv", "iwmv", "iwmv-log", "oswmv", "em-gds", "em-hds", "oracle-map"],
      "trials": 3, "seed": 5, "sweep": {"variable": "q", "values": [0.4, 0.8]}})";
    auto config = parse_experiment_config(text);
    const auto rows = run_experiment(config);
    CHECK(rows.size() == 2 * 3 * 8);
    CHECK(rows[0].method == "mv");
    CHECK(rows[8].trial == 1);
    CHECK(rows[24].sweep == 0.8);
    for (const auto& r : rows) {
      CHECK_FALSE(r.error);
      CHECK(r.seconds == 0.0);
    }
    CHECK(rows[0].bound_upper);
    CHECK_FALSE(rows[2].bound_upper);

    write_results((dir / "a").string(), rows);
    write_results((dir / "b").string(), run_experiment(config));
    CHECK(body(slurp(dir / "a.csv")) == body(slurp(dir / "b.csv")));
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
    CHECK(slurp(dir / "a.csv").rfind("# generated ", 0) == 0);

    config.threads = 4;
    const auto parallel = run_experiment(config);
    std::ostringstream x;
    std::ostringstream y;
    write_results_jsonl(x, rows);
    write_results_jsonl(y, parallel);
    CHECK(x.str() == y.str());

    std::ifstream in(dir / "a.csv");
    const auto back = read_results_csv(in);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(back[i].error_rate == rows[i].error_rate);
      CHECK(back[i].bound_upper == rows[i].bound_upper);
      CHECK(back[i].iterations == rows[i].iterations);
    }
  }

  TEST_CASE("failed rows keep the run going") {
    ResultRow bad;
    bad.scenario = "s";
    bad.method = "em-gds";
    bad.error = "boom";
    ResultRow good = bad;
    good.error.reset();
    good.error_rate = 0.25;
    good.iterations = 3;
    std::ostringstream csv;
    write_results_csv(csv, {bad, good}, "T");
    CHECK(csv.str() == std::string("# generated T\n") + kResultsHeader + "\ns,em-gds,0,0,,,0,,,\ns,em-gds,0,0,0.25,3,0,,,\n");
    std::ostringstream jsonl;
    write_results_jsonl(jsonl, {bad});
    CHECK(jsonl.str().find("\"error\":\"boom\"") != std::string::npos);

    const auto report = summarize_results({bad, good});
    REQUIRE(report.size() == 1);
    CHECK(report[0].trials == 1);
    CHECK(report[0].failed == 1);
    CHECK(report[0].mean_error == 0.25);
  }

  TEST_CASE("dataset experiments subsample the fixture") {
    const auto dir = scratch_dir("dataset");
    const std::string text = std::string(R"({"kind": "dataset", "methods": ["mv", "iwmv", "em-hds"], "trials": 2,
      "seed": 3, "sweep": {"variable": "s", "values": [0.3, 1.0]},
      "dataset": {"labels": "duchenne_labels.csv", "truth": "duchenne_truth.csv", "binary": true}})");
    std::ofstream(dir / "config.json") << text;
    fs::copy(fixture("duchenne_labels.csv"), dir / "duchenne_labels.csv");
    fs::copy(fixture("duchenne_truth.csv"), dir / "duchenne_truth.csv");
    const auto rows = run_experiment(load_experiment_config((dir / "config.json").string()));
    CHECK(rows.size() == 12);
    for (const auto& r : rows) {
      CHECK_FALSE(r.error);
      CHECK(*r.error_rate >= 0.0);
    }
    // s = 1 uses every label, so both trials agree
    CHECK(rows[6].error_rate == rows[9].error_rate);
  }

  TEST_CASE("misspecified experiments and report") {
    const auto rows = run_experiment(parse_experiment_config(R"({"kind": "misspecified", "q": 0.3,
      "misspecified": {"group_sizes": [5, 5], "item_sets": [50, 50]},
      "methods": ["mv", "em-hds", "iwmv", "iwmv-log"], "trials": 4, "seed": 2})"));
    const auto report = summarize_results(rows);
    REQUIRE(report.size() == 4);
    CHECK(report[2].method == "iwmv");
    CHECK(report[2].trials == 4);
    std::ostringstream out;
    write_report_csv(out, report);
    CHECK(out.str().rfind("scenario,method,sweep,trials,", 0) == 0);
  }
}
