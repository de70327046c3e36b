#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rgi/dataset.hpp"
#include "rgi/error.hpp"
#include "rgi/ism.hpp"
#include "rgi/metrics.hpp"
#include "rgi/model.hpp"
#include "rgi/training.hpp"

namespace {

struct GenerateArgs {
  std::string out;
  uint32_t per_family = 500;
  uint64_t seed = 1;
  uint32_t first_index = 0;
  int threads = 1;
  int max_order = 6;
};

int cmd_generate(const GenerateArgs& a) {
  rgi::GenerateConfig cfg;
  cfg.out_path = a.out;
  cfg.counts = {a.per_family, a.per_family, a.per_family, a.per_family};
  cfg.seed = a.seed;
  cfg.first_index = a.first_index;
  cfg.threads = a.threads;
  cfg.sim.max_order = a.max_order;

  const auto t0 = std::chrono::steady_clock::now();
  rgi::generate_dataset(cfg);
  const auto t1 = std::chrono::steady_clock::now();
  const double secs = std::chrono::duration<double>(t1 - t0).count();

  std::printf("wrote %u samples to %s (%u per family) in %.1f s\n", a.per_family * 4,
              cfg.out_path.c_str(), a.per_family, secs);
  return 0;
}

struct TrainArgs {
  std::string train_path;
  std::string val_path;
  std::string ckpt = "model.rgiw";
  std::string history = "history.csv";
  int epochs = 100;
  int batch_size = 16;
  double lr = 1e-3;
  int patience = 10;
  uint64_t seed = 1;
};

int cmd_train(const TrainArgs& a) {
  const auto train_set = rgi::read_dataset(a.train_path);
  const auto val_set = rgi::read_dataset(a.val_path);

  rgi::TrainConfig cfg;
  cfg.batch_size = a.batch_size;
  cfg.learning_rate = a.lr;
  cfg.max_epochs = a.epochs;
  cfg.patience = std::min(a.patience, a.epochs);
  cfg.seed = a.seed;

  rgi::Network net;
  net.init(a.seed);
  const rgi::TrainHistory history = rgi::train(net, train_set, val_set, cfg);
  rgi::save_checkpoint(a.ckpt, net);
  rgi::write_history_csv(a.history, history);

  std::printf("best validation loss %.6f at epoch %d (%zu epochs run)\n", history.best_val_total,
              history.best_epoch + 1, history.train.size());
  return 0;
}

struct EvaluateArgs {
  std::string ckpt;
  std::string data;
  std::string report = "report.csv";
  std::string details;
  int threads = 1;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const rgi::Network net = rgi::load_checkpoint(a.ckpt);
  const auto samples = rgi::read_dataset(a.data);

  std::vector<rgi::RoomDetail> details;
  const rgi::EvalReport rep =
      rgi::evaluate(net, samples, a.threads, a.details.empty() ? nullptr : &details);
  rgi::write_report_csv(a.report, rep);
  if (!a.details.empty()) rgi::write_details_csv(a.details, details);

  std::printf("acc_w %.1f%%  delta_d %.4f m  delta_theta %.3f deg  (%d rooms)\n", rep.total.acc_w,
              rep.total.delta_d, rep.total.delta_theta, rep.total.rooms);
  return 0;
}

struct InspectArgs {
  std::string data;
  size_t index = 0;
  std::string what = "rir";
  std::string out;
};

int cmd_inspect(const InspectArgs& a) {
  rgi::DatasetReader reader(a.data);
  if (a.index >= reader.size()) throw rgi::InvalidConfig("inspect: index out of range");
  const rgi::Sample s = reader.read(a.index);

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw rgi::IoFailure("cannot open " + a.out + " for writing");
    os = &file;
  }

  if (a.what == "rir") {
    const size_t taps = reader.taps();
    for (uint32_t ch = 0; ch < reader.channels(); ++ch) {
      for (size_t t = 0; t < taps; ++t) {
        if (t) *os << ',';
        *os << s.rir[ch * taps + t];
      }
      *os << '\n';
    }
  } else if (a.what == "images") {
    // The room is reproducible from the stored seed; image sources are
    // validated against the array center.
    const auto family = static_cast<rgi::ShapeFamily>(s.shape_id);
    const rgi::RoomModel room = rgi::sample_room(family, s.seed);
    std::vector<double> coeffs(room.walls.size(), 1.0);
    const auto images = rgi::enumerate_image_sources(room, 6, coeffs);
    *os << "order,x,y,z,gain,walls,valid_at_center\n";
    for (const auto& img : images) {
      std::string walls;
      for (int w : img.wall_sequence) {
        if (!walls.empty()) walls += '|';
        walls += std::to_string(w);
      }
      const bool valid = rgi::validate_path(room, img, {0.0, 0.0, 0.0});
      *os << img.order << ',' << img.position.x << ',' << img.position.y << ','
          << img.position.z << ',' << img.gain << ',' << walls << ',' << (valid ? 1 : 0) << '\n';
    }
  } else if (a.what == "walls") {
    *os << "slot,present,nx,ny,nz,d\n";
    for (size_t w = 0; w < rgi::kSlotCount; ++w) {
      *os << w << ',' << s.p[w] << ',' << s.a[w][0] << ',' << s.a[w][1] << ',' << s.a[w][2] << ','
          << s.a[w][3] << '\n';
    }
  } else {
    throw rgi::InvalidConfig("inspect: --what must be rir, images, or walls");
  }
  if (!*os) throw rgi::IoFailure("write failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Room geometry inference from simulated multichannel impulse responses"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value file");

  GenerateArgs ga;
  CLI::App* gen = app.add_subcommand("generate", "Simulate rooms and write a dataset file");
  gen->add_option("--out", ga.out, "Output dataset path")->required();
  gen->add_option("--per-family", ga.per_family, "Samples per room family (4 families)")
      ->capture_default_str();
  gen->add_option("--seed", ga.seed, "Master seed")->capture_default_str();
  gen->add_option("--first-index", ga.first_index,
                  "Global index of the first sample; lets splits share one seed")
      ->capture_default_str();
  gen->add_option("--threads", ga.threads, "Worker threads")
      ->envname("RGI_THREADS")
      ->capture_default_str();
  gen->add_option("--max-order", ga.max_order, "Highest reflection order")->capture_default_str();

  TrainArgs ta;
  CLI::App* tr = app.add_subcommand("train", "Train the estimator");
  tr->add_option("--train", ta.train_path, "Training dataset")->required();
  tr->add_option("--val", ta.val_path, "Validation dataset")->required();
  tr->add_option("--ckpt", ta.ckpt, "Output checkpoint path")->capture_default_str();
  tr->add_option("--history", ta.history, "Output history CSV")->capture_default_str();
  tr->add_option("--epochs", ta.epochs, "Maximum epochs")->capture_default_str();
  tr->add_option("--batch-size", ta.batch_size, "Mini-batch size")->capture_default_str();
  tr->add_option("--lr", ta.lr, "Learning rate")->capture_default_str();
  tr->add_option("--patience", ta.patience, "Early-stopping patience, epochs")
      ->capture_default_str();
  tr->add_option("--seed", ta.seed, "Init and shuffling seed")->capture_default_str();

  EvaluateArgs ea;
  CLI::App* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  ev->add_option("--ckpt", ea.ckpt, "Checkpoint path")->required();
  ev->add_option("--data", ea.data, "Dataset path")->required();
  ev->add_option("--report", ea.report, "Output report CSV")->capture_default_str();
  ev->add_option("--details", ea.details, "Optional per-room detail CSV");
  ev->add_option("--threads", ea.threads, "Worker threads")
      ->envname("RGI_THREADS")
      ->capture_default_str();

  InspectArgs ia;
  CLI::App* in = app.add_subcommand("inspect", "Dump a sample as CSV");
  in->add_option("--data", ia.data, "Dataset path")->required();
  in->add_option("--index", ia.index, "Sample index")->capture_default_str();
  in->add_option("--what", ia.what, "rir, images, or walls")->capture_default_str();
  in->add_option("--out", ia.out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(ga);
    if (tr->parsed()) return cmd_train(ta);
    if (ev->parsed()) return cmd_evaluate(ea);
    if (in->parsed()) return cmd_inspect(ia);
  } catch (const rgi::InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const rgi::EmptyDataset& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const rgi::NonFiniteGradient& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const rgi::BadMagic& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const rgi::VersionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const rgi::IoFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const rgi::TruncatedFile& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const rgi::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
