#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cfrec/baselines.hpp"
#include "cfrec/checkpoint.hpp"
#include "cfrec/cli.hpp"
#include "cfrec/evaluator.hpp"
#include "cfrec/hypertune.hpp"
#include "cfrec/ingest.hpp"
#include "cfrec/loss.hpp"
#include "cfrec/model.hpp"
#include "cfrec/pipeline.hpp"
#include "cfrec/ratings.hpp"
#include "cfrec/sideinfo.hpp"
#include "cfrec/trainer.hpp"

namespace py = pybind11;
using namespace cfrec;

namespace {

SparseRatings ratings_from_triplets(std::size_t n_rows, std::size_t n_cols,
                                    const std::vector<std::tuple<std::uint32_t, std::uint32_t, double>>& triplets,
                                    const std::string& orientation) {
  std::vector<RatingTriplet> t;
  t.reserve(triplets.size());
  for (const auto& [r, c, v] : triplets) t.push_back({r, c, v});
  Orientation o = orientation == "item" ? Orientation::kItemRows : Orientation::kUserRows;
  return SparseRatings::from_triplets(n_rows, n_cols, o, std::move(t));
}

std::vector<RatingEntry> entries_from_pairs(
    const std::vector<std::pair<std::uint32_t, double>>& pairs) {
  std::vector<RatingEntry> entries;
  entries.reserve(pairs.size());
  for (const auto& [c, v] : pairs) entries.push_back({c, v});
  return entries;
}

SideFeatures side_from_array(const Eigen::MatrixXd& values) {
  SideFeatures side;
  side.values = values;
  side.provenance.push_back({"array", static_cast<std::size_t>(values.cols())});
  return side;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse denoising autoencoders for collaborative filtering";

  py::register_exception<Error>(m, "CfrecError");

  py::class_<RatingScale>(m, "RatingScale")
      .def(py::init<double, double>(), py::arg("min_rating"), py::arg("max_rating"))
      .def_readwrite("min_rating", &RatingScale::min_rating)
      .def_readwrite("max_rating", &RatingScale::max_rating)
      .def("to_unit", &RatingScale::to_unit)
      .def("from_unit", &RatingScale::from_unit);

  py::class_<SparseRatings>(m, "SparseRatings")
      .def(py::init(&ratings_from_triplets), py::arg("n_rows"), py::arg("n_cols"),
           py::arg("triplets"), py::arg("orientation") = "user")
      .def_property_readonly("n_rows", &SparseRatings::rows)
      .def_property_readonly("n_cols", &SparseRatings::cols)
      .def_property_readonly("nnz", &SparseRatings::nnz)
      .def_property_readonly("orientation",
                             [](const SparseRatings& r) {
                               return std::string(orientation_name(r.orientation()));
                             })
      .def("to_triplets",
           [](const SparseRatings& r) {
             std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> out;
             out.reserve(r.nnz());
             r.for_each([&](std::size_t i, std::uint32_t j, double v) {
               out.emplace_back(static_cast<std::uint32_t>(i), j, v);
             });
             return out;
           })
      .def("row", [](const SparseRatings& r, std::size_t i) {
        std::vector<std::pair<std::uint32_t, double>> out;
        for (const auto& e : r.row(i)) out.emplace_back(e.col, e.value);
        return out;
      });

  py::class_<BiasModel>(m, "BiasModel")
      .def_readonly("global_mean", &BiasModel::global_mean)
      .def_readonly("row_means", &BiasModel::row_means)
      .def_readonly("row_counts", &BiasModel::row_counts)
      .def("bias_for", &BiasModel::bias_for);

  m.def("normalize", &normalize, py::arg("ratings"), py::arg("scale"));
  m.def("denormalize", &denormalize, py::arg("ratings"), py::arg("scale"));
  m.def("unbias", [](const SparseRatings& r) { return unbias(r); });
  m.def(
      "split",
      [](const SparseRatings& r, double train_fraction, std::uint64_t seed) {
        return split(r, SplitSpec{train_fraction, seed});
      },
      py::arg("ratings"), py::arg("train_fraction"), py::arg("seed"));
  m.def("transpose", &transpose);

  m.def(
      "parse_ratings",
      [](const std::string& path, const std::string& format,
         std::optional<std::pair<double, double>> scale) {
        std::optional<RatingScale> s;
        if (scale) s = RatingScale{scale->first, scale->second};
        RatingsData data = parse_ratings(path, format_from_name(format), s);
        return py::make_tuple(data.ratings, data.scale, data.users.ids(), data.items.ids());
      },
      py::arg("path"), py::arg("format"), py::arg("scale") = std::nullopt);

  py::class_<SideFeatures>(m, "SideFeatures")
      .def(py::init(&side_from_array), py::arg("values"))
      .def_property_readonly("values",
                             [](const SideFeatures& s) { return Eigen::MatrixXd(s.values); })
      .def_property_readonly("dim", &SideFeatures::dim)
      .def_property_readonly("n_entities", &SideFeatures::n_entities);

  m.def(
      "pca_compress",
      [](const Eigen::MatrixXd& counts, std::size_t components) {
        TagMatrix tags;
        tags.n_entities = static_cast<std::size_t>(counts.rows());
        tags.rows.resize(tags.n_entities);
        for (Eigen::Index j = 0; j < counts.cols(); ++j) {
          tags.tags.intern("t" + std::to_string(j));
        }
        for (Eigen::Index i = 0; i < counts.rows(); ++i) {
          for (Eigen::Index j = 0; j < counts.cols(); ++j) {
            const double v = counts(i, j);
            if (v != 0.0) {
              tags.rows[static_cast<std::size_t>(i)].push_back(
                  {static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(v)});
            }
          }
        }
        return pca_compress(tags, components);
      },
      py::arg("counts"), py::arg("components"));
  m.def("assemble", &assemble, py::arg("blocks"));

  py::class_<AutoencoderModel>(m, "AutoencoderModel")
      .def_readonly("input_dim", &AutoencoderModel::input_dim)
      .def_readonly("bottleneck", &AutoencoderModel::bottleneck)
      .def_readonly("side_dim", &AutoencoderModel::side_dim)
      .def_property_readonly("encoder_w",
                             [](const AutoencoderModel& m_) { return m_.encoder_w; })
      .def_property_readonly("encoder_b",
                             [](const AutoencoderModel& m_) { return m_.encoder_b; })
      .def_property_readonly("decoder_w",
                             [](const AutoencoderModel& m_) { return Eigen::MatrixXd(m_.decoder_w); })
      .def_property_readonly("decoder_b",
                             [](const AutoencoderModel& m_) { return m_.decoder_b; });

  m.def(
      "init_autoencoder",
      [](std::size_t input_dim, std::size_t bottleneck, std::size_t side_dim, std::uint64_t seed,
         const std::string& hidden, const std::string& output) {
        return init_autoencoder(input_dim, bottleneck, side_dim, seed,
                                transfer_from_name(hidden), transfer_from_name(output));
      },
      py::arg("input_dim"), py::arg("bottleneck"), py::arg("side_dim") = 0, py::arg("seed") = 42,
      py::arg("hidden_transfer") = "tanh", py::arg("output_transfer") = "identity");

  m.def(
      "forward",
      [](const AutoencoderModel& model,
         const std::vector<std::pair<std::uint32_t, double>>& row,
         const std::vector<double>& side) {
        auto entries = entries_from_pairs(row);
        return forward(model, entries, side);
      },
      py::arg("model"), py::arg("row"), py::arg("side") = std::vector<double>{});

  py::class_<LossConfig>(m, "LossConfig")
      .def(py::init([](double alpha, double beta, double mask_ratio, double lambda,
                       bool normalize_by_known) {
             LossConfig cfg;
             cfg.alpha = alpha;
             cfg.beta = beta;
             cfg.mask_ratio = mask_ratio;
             cfg.lambda = lambda;
             cfg.normalize_by_known = normalize_by_known;
             cfg.validate();
             return cfg;
           }),
           py::arg("alpha") = 1.0, py::arg("beta") = 1.0, py::arg("mask_ratio") = 0.25,
           py::arg("weight_decay") = 0.0, py::arg("normalize_by_known") = true)
      .def_readwrite("alpha", &LossConfig::alpha)
      .def_readwrite("beta", &LossConfig::beta)
      .def_readwrite("mask_ratio", &LossConfig::mask_ratio)
      .def_readwrite("weight_decay", &LossConfig::lambda);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("lr_decay", &TrainConfig::lr_decay)
      .def_readwrite("seed", &TrainConfig::rng_seed)
      .def_readwrite("shuffle", &TrainConfig::shuffle)
      .def_readwrite("threads", &TrainConfig::threads)
      .def_readwrite("loss", &TrainConfig::loss);

  py::class_<EpochRecord>(m, "EpochRecord")
      .def_readonly("epoch", &EpochRecord::epoch)
      .def_readonly("train_loss", &EpochRecord::train_loss)
      .def_readonly("validation_rmse", &EpochRecord::validation_rmse)
      .def_readonly("seconds", &EpochRecord::seconds);

  py::class_<TrainReport>(m, "TrainReport").def_readonly("epochs", &TrainReport::epochs);

  m.def(
      "train",
      [](AutoencoderModel& model, const SparseRatings& rows, const SideFeatures* side,
         const TrainConfig& cfg) { return train(model, rows, side, cfg); },
      py::arg("model"), py::arg("rows"), py::arg("side") = nullptr, py::arg("config"),
      py::call_guard<py::gil_scoped_release>());

  py::class_<AutoencoderEstimator>(m, "AutoencoderEstimator")
      .def(py::init<const AutoencoderModel&, const SparseRatings&, const SideFeatures*,
                    const BiasModel&, RatingScale>(),
           py::arg("model"), py::arg("train_rows"), py::arg("side"), py::arg("bias"),
           py::arg("scale"), py::keep_alive<1, 2>(), py::keep_alive<1, 3>(),
           py::keep_alive<1, 4>(), py::keep_alive<1, 5>())
      .def("predict", &AutoencoderEstimator::predict);

  m.def(
      "rmse",
      [](const AutoencoderEstimator& est, const SparseRatings& test, const RatingScale& scale) {
        return rmse(est, test, scale);
      },
      py::arg("estimator"), py::arg("test"), py::arg("scale"));

  py::class_<MFModel>(m, "MFModel")
      .def_readonly("rank", &MFModel::rank)
      .def_readonly("objective_trace", &MFModel::objective_trace)
      .def_property_readonly("row_factors",
                             [](const MFModel& m_) { return Eigen::MatrixXd(m_.row_factors); })
      .def_property_readonly("col_factors",
                             [](const MFModel& m_) { return Eigen::MatrixXd(m_.col_factors); });

  m.def("als_wr", &als_wr, py::arg("train"), py::arg("rank"), py::arg("weight_decay"),
        py::arg("iterations"), py::arg("seed"), py::arg("threads") = 0,
        py::call_guard<py::gil_scoped_release>());
  m.def("mf_predict", &mf_predict);

  py::class_<EquivalenceReport>(m, "EquivalenceReport")
      .def_readonly("max_deviation", &EquivalenceReport::max_deviation)
      .def_readonly("sigma_ratio", &EquivalenceReport::sigma_ratio)
      .def_readonly("passed", &EquivalenceReport::passed);
  m.def("equivalence_check", &equivalence_check, py::arg("model"), py::arg("inputs"),
        py::arg("deviation_tolerance") = 1e-10, py::arg("sigma_tolerance") = 1e-8);

  py::class_<Gene>(m, "Gene")
      .def_readonly("name", &Gene::name)
      .def_readonly("lo", &Gene::lo)
      .def_readonly("hi", &Gene::hi);
  py::class_<GenomeSpace>(m, "GenomeSpace")
      .def_static("training_defaults", &GenomeSpace::training_defaults)
      .def_readonly("genes", &GenomeSpace::genes)
      .def_property_readonly("dim", &GenomeSpace::dim);
  py::class_<ScoredGenome>(m, "ScoredGenome")
      .def_readonly("genome", &ScoredGenome::genome)
      .def_readonly("fitness", &ScoredGenome::fitness);
  py::class_<GaResult>(m, "GaResult")
      .def_readonly("best", &GaResult::best)
      .def_readonly("generations", &GaResult::generations);

  m.def(
      "evolve",
      [](const GenomeSpace& space, const std::function<double(const Genome&)>& fitness,
         std::size_t population, std::size_t generations, double sigma,
         const std::array<double, 4>& lambdas, std::uint64_t seed, const std::string& log_path,
         bool resume) {
        GaConfig cfg;
        cfg.population = population;
        cfg.generations = generations;
        cfg.sigma = sigma;
        cfg.lambdas = lambdas;
        cfg.seed = seed;
        cfg.log_path = log_path;
        cfg.resume = resume;
        return evolve(space, fitness, cfg);
      },
      py::arg("space"), py::arg("fitness"), py::arg("population") = 20,
      py::arg("generations") = 10, py::arg("sigma") = 0.08,
      py::arg("lambdas") = std::array<double, 4>{0.1, 0.2, 0.3, 0.4}, py::arg("seed") = 0,
      py::arg("log_path") = std::string(), py::arg("resume") = false);

  m.def("save_checkpoint", &save_checkpoint);
  m.def("load_checkpoint", &load_checkpoint);
  py::class_<Checkpoint>(m, "Checkpoint")
      .def(py::init<>())
      .def_readwrite("autoencoder", &Checkpoint::autoencoder)
      .def_readwrite("bias", &Checkpoint::bias)
      .def_readonly("epochs_trained", &Checkpoint::epochs_trained);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) { return run_cli(args); },
      py::arg("args"), "Run the command line driver in-process");
}
