#include "tumorscope/pipeline.hpp"

#include <cstdio>
#include <sstream>

#include "tumorscope/binary_io.hpp"

namespace tumorscope {

Model init_model(const RunConfig& config, std::size_t input_side) {
  ModelConfig mc = config.model;
  mc.input_side = input_side;
  mc.seed = derive_seed(config.train.seed, "model/init");
  const ShapeTrace trace = shape_trace(mc);
  if (!trace.ok()) {
    throw ShapeError("model: " + to_string(mc.variant) + " variant cannot run at input side " +
                     std::to_string(input_side) + ": " + *trace.error);
  }
  return build_model(mc);
}

FitResult train_to_dir(const DatasetSplit& data, const RunConfig& config,
                       const std::filesystem::path& out_dir) {
  if (data.train.empty() || data.val.empty()) throw Error("train: dataset needs train and val records");
  std::filesystem::create_directories(out_dir);
  io::write_text(out_dir / "config.json", config.to_json());
  FitResult r = fit(init_model(config, data.train.front().image.dim(1)), data, config.train, out_dir);
  save_checkpoint(r.model, out_dir / "last.tscp");
  return r;
}

EvalReport evaluate_model(const Model& model, const std::vector<SliceRecord>& records,
                          const EvalConfig& config) {
  return evaluate(records, predict(model, records), config.threshold, config.misclass);
}

ExplainArtifacts explain_to_dir(const Model& model, const TensorF& image, const std::string& id,
                                const RunConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ExplainArtifacts a;
  a.explanation = combined_explanation(model, image, config.explain);
  a.json_path = out_dir / (id + ".json");
  a.ppm_path = out_dir / (id + "_combined.ppm");
  io::write_text(a.json_path, a.explanation.to_json());
  write_ppm(render_explanation(image, a.explanation, config.render), a.ppm_path);
  return a;
}

AuditSummary audit_to_dir(const Model& model, const std::vector<SliceRecord>& records,
                          const RunConfig& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  AuditSummary s;
  s.report = evaluate_model(model, records, config.eval);
  io::write_text(out_dir / "report.json", s.report.to_json());

  std::string csv = "kind,record_id,label,score,blur,tumour_fraction,bin,composite\n";
  const auto emit = [&](const char* kind, const MisclassEntry& e) {
    const SliceRecord& r = records[e.index];
    const std::string id = record_id(r);
    const ExplainArtifacts a = explain_to_dir(model, r.image, id, config, out_dir / "cases");
    s.composites.push_back(a.ppm_path);
    char line[512];
    std::snprintf(line, sizeof line, "%s,%s,%d,%.9g,%.9g,%.9g,%s,cases/%s\n", kind, id.c_str(), e.label,
                  e.score, e.blur, e.tumour_fraction, e.bin.c_str(),
                  a.ppm_path.filename().string().c_str());
    csv += line;
  };
  for (const auto& e : s.report.misclass.false_negatives) emit("fn", e);
  for (const auto& e : s.report.misclass.false_positives) emit("fp", e);
  io::write_text(out_dir / "misclassified.csv", csv);
  return s;
}

void read_scores_csv(const std::filesystem::path& path, std::vector<int>& labels,
                     std::vector<double>& scores) {
  const auto bytes = io::read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  std::size_t line_no = 0;
  labels.clear();
  scores.clear();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line.rfind("label", 0) == 0)) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      std::size_t used = 0;
      const int label = std::stoi(line.substr(0, comma), &used);
      const double score = std::stod(line.substr(comma + 1));
      if ((label != 0 && label != 1) || !(score >= 0.0 && score <= 1.0)) throw std::out_of_range("range");
      labels.push_back(label);
      scores.push_back(score);
    } catch (const std::exception&) {
      throw Error("scores csv " + path.string() + ": bad row " + std::to_string(line_no) +
                  " (expected label in {0,1}, score in [0,1])");
    }
  }
  if (labels.empty()) throw Error("scores csv " + path.string() + ": no rows");
}

}  // namespace tumorscope
