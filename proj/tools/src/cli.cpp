#include "uwie_cli/cli.hpp"

#include <CLI11.hpp>

#include "commands.hpp"
#include "uwie/errors.hpp"

namespace uwie::cli {

namespace {

void add_common(CLI::App* sub, CommonOptions& c) {
  sub->add_option("--checkpoint", c.checkpoint, "Model checkpoint file");
  sub->add_option("--input", c.input, "Input image file or directory");
  sub->add_option("--output", c.output, "Output file or directory");
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--report-format", c.format, "Report format: csv or json")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, ReportFormat>{{"csv", ReportFormat::csv}, {"json", ReportFormat::json}},
          CLI::ignore_case))
      ->default_str("csv")
      ->option_text("csv|json [csv]");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Underwater image enhancement: training, inference, metrics and synthesis"};
  app.name(args.empty() ? "uwie" : args.front());
  app.require_subcommand(1);

  TrainOptions train;
  auto* t = app.add_subcommand("train", "Train on a UIEB-layout dataset");
  add_common(t, train.common);
  t->add_option("--data", train.data, "Dataset root containing raw and reference directories");
  t->add_option("--raw-dir", train.raw_dir, "Raw image directory name")->capture_default_str();
  t->add_option("--reference-dir", train.reference_dir, "Reference image directory name")
      ->capture_default_str();
  t->add_option("--epochs", train.epochs, "Training epochs")->capture_default_str();
  t->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
  t->add_option("--resize", train.resize, "Training resolution HxW, or 'native'")->capture_default_str();
  t->add_option("--checkpoint-every", train.checkpoint_every, "Also checkpoint every K epochs (0: only at the end)")
      ->capture_default_str();

  EnhanceOptions enhance;
  auto* e = app.add_subcommand("enhance", "Enhance an image or a directory of images");
  add_common(e, enhance.common);
  e->add_flag("--dump-ambient", enhance.dump_ambient, "Write the estimated ambient light as JSON");
  e->add_flag("--dump-transmission", enhance.dump_transmission,
              "Write the min-max normalised inverse transmission map as PNG");

  EvaluateOptions evaluate;
  auto* v = app.add_subcommand("evaluate", "Score images with PSNR/SSIM (given references) and UCIQE/UIQM");
  add_common(v, evaluate.common);
  v->add_option("--reference", evaluate.reference, "Reference image directory (enables PSNR and SSIM)");

  BenchmarkOptions bench;
  auto* b = app.add_subcommand("benchmark", "Measure forward-pass throughput");
  add_common(b, bench.common);
  b->add_option("--width", bench.width, "Frame width")->capture_default_str();
  b->add_option("--height", bench.height, "Frame height")->capture_default_str();
  b->add_option("--iters", bench.iters, "Timed forward passes")->capture_default_str();

  SynthesizeOptions synth;
  auto* s = app.add_subcommand("synthesize", "Degrade clean images with the underwater formation model");
  add_common(s, synth.common);
  s->add_option("--beta", synth.beta, "Attenuation coefficients r,g,b (1/m)");
  s->add_option("--depth", synth.depth, "Transmission distance (m)");
  s->add_option("--ambient", synth.ambient, "Ambient light r,g,b in [0,1]");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (t->parsed()) return run_train(train, out, err);
    if (e->parsed()) return run_enhance(enhance, out, err);
    if (v->parsed()) return run_evaluate(evaluate, out, err);
    if (b->parsed()) return run_benchmark(bench, out, err);
    if (s->parsed()) return run_synthesize(synth, out, err);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace uwie::cli
