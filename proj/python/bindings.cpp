#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qkvcomm/cache_io.hpp"
#include "qkvcomm/pipeline.hpp"

namespace py = pybind11;
using namespace qkvcomm;

namespace {

Tensor tensor_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 4)
        throw InvalidArgument("expected a 4-D float32 array (batch, heads, seq, head_dim)");
    Tensor t;
    for (int i = 0; i < 4; ++i) t.shape[size_t(i)] = uint32_t(arr.shape(i));
    t.data.assign(arr.data(), arr.data() + arr.size());
    t.validate();
    return t;
}

py::array_t<float> array_from_tensor(const Tensor& t) {
    py::array_t<float> arr({py::ssize_t(t.shape[0]), py::ssize_t(t.shape[1]),
                            py::ssize_t(t.shape[2]), py::ssize_t(t.shape[3])});
    std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
    return arr;
}

AttentionMap attention_from_array(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 3)
        throw InvalidArgument("expected a 3-D float32 array (layers, heads, positions)");
    AttentionMap map;
    map.num_layers = uint32_t(arr.shape(0));
    map.num_heads = uint32_t(arr.shape(1));
    map.num_positions = uint32_t(arr.shape(2));
    map.weights.assign(arr.data(), arr.data() + arr.size());
    map.validate();
    return map;
}

py::array_t<float> array_from_attention(const AttentionMap& map) {
    py::array_t<float> arr({py::ssize_t(map.num_layers), py::ssize_t(map.num_heads),
                            py::ssize_t(map.num_positions)});
    std::copy(map.weights.begin(), map.weights.end(), arr.mutable_data());
    return arr;
}

SenderConfig make_sender_config(double alpha, double gamma_mu, double gamma_sigma, double ratio,
                                int max_bits, int target_bits, int min_bits,
                                size_t facts_budget) {
    SenderConfig cfg;
    cfg.selection.alpha = alpha;
    cfg.selection.gamma_mu = gamma_mu;
    cfg.selection.gamma_sigma = gamma_sigma;
    cfg.selection.ratio = ratio;
    cfg.bits = {max_bits, target_bits, min_bits};
    cfg.facts_budget = facts_budget;
    cfg.validate();
    return cfg;
}

py::dict report_to_dict(const TransferReport& report) {
    py::dict d;
    d["original_bytes"] = report.original_bytes;
    d["payload_bytes"] = report.payload_bytes;
    d["compression_ratio"] = report.compression_ratio;
    d["selected_layers"] = report.selected_layers;
    d["selected_indices"] = report.selected_indices;
    d["per_layer_bits"] = report.per_layer_bits;
    d["mse"] = report.reconstruction_mse;
    d["elapsed_ms"] = report.elapsed.count();
    return d;
}

CalibrationMode mode_from_name(const std::string& name) {
    if (name == "scalar") return CalibrationMode::Scalar;
    if (name == "per-dim" || name == "per_dimension") return CalibrationMode::PerDimension;
    throw InvalidArgument("mode must be 'scalar' or 'per-dim'");
}

}  // namespace

PYBIND11_MODULE(_qkvcomm, m) {
    m.doc() = "Compressed KV cache transmission between model agents";

    py::register_exception<InvalidArgument>(m, "InvalidArgumentError", PyExc_ValueError);
    py::register_exception<WireError>(m, "WireFormatError", PyExc_ValueError);
    py::register_exception<TransportError>(m, "TransportFailure", PyExc_ConnectionError);
    py::register_exception<IoError>(m, "IoFailure", PyExc_OSError);

    py::class_<KvCache>(m, "KvCache")
        .def_readwrite("model_id", &KvCache::model_id)
        .def_property_readonly("layer_indices",
                               [](const KvCache& c) {
                                   return std::vector<int>(c.layer_indices.begin(),
                                                           c.layer_indices.end());
                               })
        .def_property_readonly("num_layers", [](const KvCache& c) { return c.num_layers(); })
        .def("key", [](const KvCache& c, size_t i) { return array_from_tensor(c.layers.at(i).key); })
        .def("value",
             [](const KvCache& c, size_t i) { return array_from_tensor(c.layers.at(i).value); })
        .def_static(
            "from_arrays",
            [](const std::string& model_id,
               const std::vector<std::pair<py::array_t<float, py::array::c_style |
                                                                   py::array::forcecast>,
                                           py::array_t<float, py::array::c_style |
                                                                  py::array::forcecast>>>&
                   layers) {
                std::vector<LayerKv> kv;
                for (const auto& [k, v] : layers)
                    kv.push_back({tensor_from_array(k), tensor_from_array(v)});
                return KvCache::dense(model_id, std::move(kv));
            },
            py::arg("model_id"), py::arg("layers"));

    py::class_<CalibrationProfile>(m, "CalibrationProfile")
        .def_readonly("model_id", &CalibrationProfile::model_id)
        .def_property_readonly("mode",
                               [](const CalibrationProfile& p) {
                                   return p.mode == CalibrationMode::Scalar ? "scalar"
                                                                            : "per-dim";
                               })
        .def_property_readonly("num_layers",
                               [](const CalibrationProfile& p) { return p.num_layers(); });

    py::class_<Fact>(m, "Fact")
        .def_property_readonly("kind", [](const Fact& f) { return fact_kind_name(f.kind); })
        .def_readonly("content", &Fact::content)
        .def_readonly("confidence", &Fact::confidence)
        .def_readonly("metadata", &Fact::metadata)
        .def("__repr__", [](const Fact& f) {
            return "Fact(" + std::string(fact_kind_name(f.kind)) + ", '" + f.content + "')";
        });

    py::class_<LruCache>(m, "LruCache")
        .def(py::init<uint64_t, double, std::string>(), py::arg("capacity_bytes"),
             py::arg("eviction_threshold") = 0.8, py::arg("spill_dir") = "")
        .def("put",
             [](LruCache& c, uint64_t key, const py::bytes& value) {
                 const std::string_view view = value;
                 c.put(key, std::vector<uint8_t>(view.begin(), view.end()));
             })
        .def("get",
             [](LruCache& c, uint64_t key) -> py::object {
                 auto v = c.get(key);
                 if (!v) return py::none();
                 return py::bytes(reinterpret_cast<const char*>(v->data()), v->size());
             })
        .def_property_readonly("used_bytes", &LruCache::used_bytes)
        .def_property_readonly("usage_fraction", &LruCache::usage_fraction);

    m.def("generate_cache",
          [](uint32_t num_layers, uint32_t num_heads, uint32_t seq_len, uint32_t head_dim,
             std::vector<float> mean, std::vector<float> std_dev, uint64_t seed,
             const std::string& model_id) {
              SyntheticSpec spec;
              spec.num_layers = num_layers;
              spec.num_heads = num_heads;
              spec.seq_len = seq_len;
              spec.head_dim = head_dim;
              spec.per_layer_mean =
                  mean.empty() ? std::vector<float>(num_layers, 0.0f) : std::move(mean);
              spec.per_layer_std =
                  std_dev.empty() ? std::vector<float>(num_layers, 1.0f) : std::move(std_dev);
              spec.seed = seed;
              spec.model_id = model_id;
              return generate_cache(spec);
          },
          py::arg("num_layers"), py::arg("num_heads"), py::arg("seq_len"), py::arg("head_dim"),
          py::arg("mean") = std::vector<float>{}, py::arg("std") = std::vector<float>{},
          py::arg("seed") = 0, py::arg("model_id") = "synthetic");

    m.def("generate_attention",
          [](const KvCache& cache, uint64_t seed) {
              return array_from_attention(generate_attention(cache, seed));
          },
          py::arg("cache"), py::arg("seed") = 0);

    m.def("tensor_stats", [](const py::array_t<float, py::array::c_style |
                                                          py::array::forcecast>& arr) {
        const TensorStats s = tensor_stats(tensor_from_array(arr));
        py::dict d;
        d["min"] = s.min;
        d["max"] = s.max;
        d["mean"] = s.mean;
        d["std"] = s.std_dev;
        return d;
    });

    m.def("gaussian_prior",
          [](size_t num_layers, double gamma_mu, double gamma_sigma) {
              SelectionConfig cfg;
              cfg.gamma_mu = gamma_mu;
              cfg.gamma_sigma = gamma_sigma;
              return gaussian_prior(num_layers, cfg);
          },
          py::arg("num_layers"), py::arg("gamma_mu") = 0.5, py::arg("gamma_sigma") = 0.25);
    m.def("combined_scores", &combined_scores, py::arg("attention"), py::arg("prior"),
          py::arg("alpha"));
    m.def("select_layers", &select_layers, py::arg("scores"), py::arg("ratio"));

    m.def("quantize",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& arr,
             int bits) {
              const QuantizedTensor q = quantize(tensor_from_array(arr), bits);
              py::array_t<uint8_t> codes(py::ssize_t(q.codes.size()));
              std::copy(q.codes.begin(), q.codes.end(), codes.mutable_data());
              py::dict d;
              d["codes"] = codes;
              d["bits"] = q.params.bits;
              d["scale"] = q.params.scale;
              d["zero_point"] = q.params.zero_point;
              d["shape"] = q.shape;
              return d;
          },
          py::arg("tensor"), py::arg("bits"));

    m.def("dequantize",
          [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& codes,
             int bits, float scale, float zero_point, std::array<uint32_t, 4> shape) {
              QuantizedTensor q;
              q.codes.assign(codes.data(), codes.data() + codes.size());
              q.params = {bits, scale, zero_point};
              q.shape = shape;
              return array_from_tensor(dequantize(q));
          },
          py::arg("codes"), py::arg("bits"), py::arg("scale"), py::arg("zero_point"),
          py::arg("shape"));

    m.def("pack_codes",
          [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& codes,
             int bits) {
              const std::vector<uint8_t> packed = pack_codes(
                  std::span<const uint8_t>(codes.data(), size_t(codes.size())), bits);
              return py::bytes(reinterpret_cast<const char*>(packed.data()), packed.size());
          },
          py::arg("codes"), py::arg("bits"));

    m.def("unpack_codes",
          [](const py::bytes& packed, int bits, size_t count) {
              const std::string_view view = packed;
              const std::vector<uint8_t> codes = unpack_codes(
                  std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(view.data()),
                                           view.size()),
                  bits, count);
              py::array_t<uint8_t> out(py::ssize_t(codes.size()));
              std::copy(codes.begin(), codes.end(), out.mutable_data());
              return out;
          },
          py::arg("packed"), py::arg("bits"), py::arg("count"));

    m.def("compute_profile",
          [](const KvCache& cache, const std::string& mode) {
              return compute_profile({cache}, mode_from_name(mode));
          },
          py::arg("cache"), py::arg("mode") = "scalar");
    m.def("calibrate_cache", &calibrate_cache, py::arg("cache"), py::arg("sender"),
          py::arg("receiver"));
    m.def("save_profile", &save_profile, py::arg("profile"), py::arg("path"));
    m.def("load_profile", &load_profile, py::arg("path"));

    m.def("extract_facts", &extract_facts, py::arg("text"), py::arg("budget") = 16);
    m.def("extract_keywords", &extract_keywords, py::arg("text"), py::arg("top_k") = 10);
    m.def("format_facts_summary", &format_facts_summary, py::arg("facts"));
    m.def("detect_content_type", [](const std::string& text) {
        return detect_content_type(text) == ContentType::Structured ? "structured" : "general";
    });
    m.def("content_hash",
          [](const py::bytes& data) {
              const std::string_view view = data;
              return content_hash(std::span<const uint8_t>(
                  reinterpret_cast<const uint8_t*>(view.data()), view.size()));
          });

    m.def("compress",
          [](const KvCache& cache, py::object attention, const std::string& context,
             double alpha, double gamma_mu, double gamma_sigma, double ratio, int max_bits,
             int target_bits, int min_bits, size_t facts_budget, uint64_t attention_seed) {
              const SenderConfig cfg = make_sender_config(alpha, gamma_mu, gamma_sigma, ratio,
                                                          max_bits, target_bits, min_bits,
                                                          facts_budget);
              AttentionMap map;
              if (attention.is_none()) {
                  map = generate_attention(cache, attention_seed);
              } else {
                  map = attention_from_array(
                      attention.cast<py::array_t<float, py::array::c_style |
                                                             py::array::forcecast>>());
              }
              TransferReport report;
              const Payload payload = build_payload(cache, map, context, cfg, &report);
              const std::vector<uint8_t> bytes = serialize(payload);
              report.payload_bytes = bytes.size();
              report.compression_ratio =
                  double(report.original_bytes) / double(report.payload_bytes);
              return py::make_tuple(
                  py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                  report_to_dict(report));
          },
          py::arg("cache"), py::arg("attention") = py::none(), py::arg("context") = "",
          py::arg("alpha") = 0.5, py::arg("gamma_mu") = 0.5, py::arg("gamma_sigma") = 0.25,
          py::arg("ratio") = 0.7, py::arg("max_bits") = 8, py::arg("target_bits") = 6,
          py::arg("min_bits") = 4, py::arg("facts_budget") = 16, py::arg("attention_seed") = 0);

    m.def("decompress",
          [](const py::bytes& payload_bytes, py::object receiver_profile,
             py::object sender_profile) {
              const std::string_view view = payload_bytes;
              const Payload payload = deserialize(std::span<const uint8_t>(
                  reinterpret_cast<const uint8_t*>(view.data()), view.size()));
              std::optional<CalibrationProfile> rx;
              std::optional<CalibrationProfile> tx;
              if (!receiver_profile.is_none()) rx = receiver_profile.cast<CalibrationProfile>();
              if (!sender_profile.is_none()) tx = sender_profile.cast<CalibrationProfile>();
              const ReceiveResult result = decode_payload(payload, rx, tx);
              return py::make_tuple(result.cache, result.facts, result.facts_summary);
          },
          py::arg("payload"), py::arg("receiver_profile") = py::none(),
          py::arg("sender_profile") = py::none());

    m.def("integrate", &integrate, py::arg("sender_cache"), py::arg("receiver_cache"));

    m.def("save_cache",
          [](const KvCache& cache, const std::string& path) { save_cache(cache, path, 0); },
          py::arg("cache"), py::arg("path"));
    m.def("load_cache", [](const std::string& path) { return load_cache(path, nullptr); },
          py::arg("path"));

    m.attr("__version__") = "0.1.0";
}
