#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "qkvcomm/cache_io.hpp"
#include "qkvcomm/config.hpp"
#include "qkvcomm/pipeline.hpp"

namespace {

using namespace qkvcomm;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitFormat = 3;
constexpr int kExitTransport = 4;

Config load_config_or_default(const std::string& flag_path) {
    std::string path = flag_path;
    if (path.empty()) {
        if (const char* env = std::getenv("QKVCOMM_CONFIG")) path = env;
    }
    if (path.empty()) return Config{};
    return Config::load(path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

BitTriple bits_with_target(const Config& config, int target_override) {
    BitTriple bits = config.bits();
    if (target_override > 0) {
        bits.target_bits = target_override;
        bits.max_bits = std::max(bits.max_bits, target_override);
        bits.min_bits = std::min(bits.min_bits, target_override);
    }
    return bits;
}

SenderConfig sender_config(const Config& config, int target_override, double ratio_override) {
    SenderConfig cfg;
    cfg.selection = config.selection();
    if (ratio_override > 0.0) cfg.selection.ratio = ratio_override;
    cfg.bits = bits_with_target(config, target_override);
    cfg.facts_budget = config.facts_budget();
    cfg.selection.validate();
    return cfg;
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(values[i]);
    }
    return out;
}

std::string join_sizes(const std::vector<size_t>& values) {
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(values[i]);
    }
    return out;
}

void print_report(const TransferReport& report) {
    std::printf("original_bytes=%llu\n", (unsigned long long)report.original_bytes);
    std::printf("payload_bytes=%llu\n", (unsigned long long)report.payload_bytes);
    std::printf("compression_ratio=%.6g\n", report.compression_ratio);
    std::printf("selected_layers=%zu\n", report.selected_layers);
    std::printf("selected_indices=%s\n", join_sizes(report.selected_indices).c_str());
    std::printf("per_layer_bits=%s\n", join_ints(report.per_layer_bits).c_str());
    std::printf("elapsed_ms=%.3f\n", report.elapsed.count());
}

int cmd_gen(const std::string& spec_path, const std::string& out_path, int64_t seed_override) {
    try {
        Config config = Config::load(spec_path);
        SyntheticSpec spec = config.synthetic_spec();
        if (seed_override >= 0) spec.seed = uint64_t(seed_override);
        const KvCache cache = generate_cache(spec);
        save_cache(cache, out_path);
        std::printf("layers=%zu\n", cache.num_layers());
        std::printf("shape=%u,%u,%u,%u\n", cache.layers.front().key.batch(),
                    cache.layers.front().key.heads(), cache.layers.front().key.seq_len(),
                    cache.layers.front().key.head_dim());
        std::printf("out=%s\n", out_path.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "gen: %s\n", e.what());
        return kExitInput;
    }
}

int cmd_profile(const std::string& cache_path, int probe_override,
                const std::string& config_path) {
    try {
        const Config config = load_config_or_default(config_path);
        const KvCache cache = load_cache(cache_path);
        const BitTriple bits = config.bits();
        const int probe = probe_override > 0 ? probe_override : config.probe_bits();

        const SensitivityReport report = profile_sensitivity({cache}, probe);
        const BitAllocation alloc =
            allocate_bits(report, bits.max_bits, bits.target_bits, bits.min_bits);
        for (size_t l = 0; l < report.per_layer_error.size(); ++l) {
            const int b = alloc.per_layer_bits[l];
            const char* bucket = b == bits.max_bits   ? "max"
                                 : b == bits.min_bits ? "min"
                                                      : "target";
            std::printf("layer=%zu error=%.6e bits=%d bucket=%s\n", l,
                        report.per_layer_error[l], b, bucket);
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "profile: %s\n", e.what());
        return kExitInput;
    }
}

int cmd_compress(const std::string& cache_path, const std::string& config_path,
                 std::string out_path, const std::string& context_path, int target_bits,
                 double ratio, int64_t seed, const std::string& spill_dir) {
    std::unique_ptr<LruCache> fact_cache;
    KvCache cache;
    AttentionMap attention;
    std::string context_text;
    SenderConfig cfg;
    try {
        const Config config = load_config_or_default(config_path);
        cache = load_cache(cache_path);
        cfg = sender_config(config, target_bits, ratio);
        if (const uint64_t capacity = config.cache_capacity_bytes(); capacity > 0) {
            const std::string dir = spill_dir.empty() ? config.spill_dir() : spill_dir;
            fact_cache = std::make_unique<LruCache>(capacity, config.eviction_threshold(), dir);
            cfg.fact_cache = fact_cache.get();
        }
        if (!context_path.empty()) context_text = read_text_file(context_path);
        attention = generate_attention(cache, seed >= 0 ? uint64_t(seed) : config.get_uint("seed", 0));
        if (out_path.empty()) out_path = cache_path + ".qkvc";
    } catch (const std::exception& e) {
        std::fprintf(stderr, "compress: %s\n", e.what());
        return kExitInput;
    }

    try {
        TransferReport report;
        const Payload payload = build_payload(cache, attention, context_text, cfg, &report);
        const std::vector<uint8_t> bytes = serialize(payload);
        write_file(out_path, bytes);
        report.payload_bytes = bytes.size();
        report.compression_ratio = double(report.original_bytes) / double(report.payload_bytes);
        print_report(report);
        std::printf("out=%s\n", out_path.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "compress: %s\n", e.what());
        return kExitInput;
    }
}

int cmd_decompress(const std::string& payload_path, std::string out_path,
                   const std::string& config_path, const std::string& facts_path) {
    std::vector<uint8_t> bytes;
    std::optional<CalibrationProfile> receiver_profile;
    std::optional<CalibrationProfile> sender_profile;
    try {
        const Config config = load_config_or_default(config_path);
        bytes = read_file(payload_path);
        if (auto path = config.receiver_profile_path()) receiver_profile = load_profile(*path);
        if (auto path = config.sender_profile_path()) sender_profile = load_profile(*path);
        if (out_path.empty()) out_path = payload_path + ".qkvt";
    } catch (const std::exception& e) {
        std::fprintf(stderr, "decompress: %s\n", e.what());
        return kExitInput;
    }

    ReceiveResult result;
    try {
        const Payload payload = deserialize(bytes);
        result = decode_payload(payload, receiver_profile, sender_profile);
    } catch (const WireError& e) {
        std::fprintf(stderr, "decompress: %s (%s)\n", e.what(), wire_code_name(e.code()));
        return kExitFormat;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "decompress: %s\n", e.what());
        return kExitFormat;
    }

    try {
        save_cache(result.cache, out_path, result.payload.header.total_layers);
        if (!facts_path.empty()) {
            const std::string& summary = result.facts_summary;
            write_file(facts_path, std::span<const uint8_t>(
                                       reinterpret_cast<const uint8_t*>(summary.data()),
                                       summary.size()));
        }
        std::printf("layers=%zu\n", result.cache.num_layers());
        std::printf("total_layers=%u\n", result.payload.header.total_layers);
        std::printf("facts=%zu\n", result.facts.size());
        std::printf("out=%s\n", out_path.c_str());
        if (facts_path.empty() && !result.facts_summary.empty())
            std::printf("%s\n", result.facts_summary.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "decompress: %s\n", e.what());
        return kExitInput;
    }
}

int cmd_send(const std::string& address, const std::string& cache_path,
             const std::string& config_path, const std::string& context_path, int target_bits,
             double ratio, int64_t seed) {
    KvCache cache;
    AttentionMap attention;
    std::string context_text;
    SenderConfig cfg;
    try {
        const Config config = load_config_or_default(config_path);
        cache = load_cache(cache_path);
        cfg = sender_config(config, target_bits, ratio);
        if (!context_path.empty()) context_text = read_text_file(context_path);
        attention = generate_attention(cache, seed >= 0 ? uint64_t(seed) : config.get_uint("seed", 0));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "send: %s\n", e.what());
        return kExitInput;
    }

    try {
        auto connection = tcp_connect(address);
        const TransferReport report = send(cache, attention, context_text, cfg, *connection);
        print_report(report);
        return kExitOk;
    } catch (const TransportError& e) {
        std::fprintf(stderr, "send: %s\n", e.what());
        return kExitTransport;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "send: %s\n", e.what());
        return kExitInput;
    }
}

int cmd_serve(const std::string& address, const std::string& out_dir,
              const std::string& config_path, uint64_t max_frames) {
    std::optional<CalibrationProfile> receiver_profile;
    std::optional<CalibrationProfile> sender_profile;
    try {
        const Config config = load_config_or_default(config_path);
        if (auto path = config.receiver_profile_path()) receiver_profile = load_profile(*path);
        if (auto path = config.sender_profile_path()) sender_profile = load_profile(*path);
        std::filesystem::create_directories(out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "serve: %s\n", e.what());
        return kExitInput;
    }

    try {
        TcpListener listener(address);
        std::fprintf(stderr, "serve: listening on port %u\n", listener.port());
        std::printf("port=%u\n", listener.port());
        std::fflush(stdout);

        std::atomic<uint64_t> frames_done{0};
        std::mutex output_mutex;
        uint64_t next_output = 0;
        std::vector<std::thread> workers;

        while (max_frames == 0 || frames_done.load() < max_frames) {
            std::unique_ptr<TcpConnection> connection;
            try {
                connection = listener.accept();
            } catch (const TransportError&) {
                break;  // listener closed
            }
            workers.emplace_back([&, conn = std::shared_ptr<TcpConnection>(
                                         std::move(connection))]() mutable {
                while (true) {
                    std::optional<std::vector<uint8_t>> frame;
                    try {
                        frame = conn->recv_frame();
                    } catch (const TransportError& e) {
                        std::fprintf(stderr, "serve: %s\n", e.what());
                        return;
                    }
                    if (!frame) return;
                    try {
                        const Payload payload = deserialize(std::span<const uint8_t>(*frame));
                        const ReceiveResult result =
                            decode_payload(payload, receiver_profile, sender_profile);
                        uint64_t index;
                        {
                            std::lock_guard lock(output_mutex);
                            index = next_output++;
                        }
                        char name[64];
                        std::snprintf(name, sizeof(name), "cache_%04llu.qkvt",
                                      (unsigned long long)index);
                        save_cache(result.cache, out_dir + "/" + name,
                                   result.payload.header.total_layers);
                        std::snprintf(name, sizeof(name), "facts_%04llu.txt",
                                      (unsigned long long)index);
                        const std::string& summary = result.facts_summary;
                        write_file(out_dir + "/" + name,
                                   std::span<const uint8_t>(
                                       reinterpret_cast<const uint8_t*>(summary.data()),
                                       summary.size()));
                        {
                            std::lock_guard lock(output_mutex);
                            std::printf("payload_bytes=%zu\n", frame->size());
                            std::printf("cache=%s/cache_%04llu.qkvt\n", out_dir.c_str(),
                                        (unsigned long long)index);
                            std::fflush(stdout);
                        }
                    } catch (const std::exception& e) {
                        std::fprintf(stderr, "serve: frame rejected: %s\n", e.what());
                    }
                    if (max_frames != 0 && ++frames_done >= max_frames) return;
                }
            });
            if (max_frames != 0 && frames_done.load() >= max_frames) break;
        }
        for (std::thread& t : workers) t.join();
        return kExitOk;
    } catch (const TransportError& e) {
        std::fprintf(stderr, "serve: %s\n", e.what());
        return kExitTransport;
    }
}

int cmd_bench(const std::string& spec_path, const std::string& bits_list,
              const std::string& csv_path, const std::string& config_path) {
    try {
        const Config config = load_config_or_default(config_path);
        Config spec_config = Config::load(spec_path);
        const SyntheticSpec spec = spec_config.synthetic_spec();

        std::vector<int> targets;
        std::stringstream stream(bits_list);
        std::string item;
        while (std::getline(stream, item, ',')) {
            if (item.empty()) continue;
            targets.push_back(std::stoi(item));
        }
        if (targets.empty()) {
            std::fprintf(stderr, "bench: empty bit sweep\n");
            return kExitInput;
        }

        std::vector<SenderConfig> sweep;
        for (int target : targets) {
            SenderConfig cfg = sender_config(config, target, 0.0);
            sweep.push_back(cfg);
        }

        const std::vector<TransferReport> reports = run_benchmark(spec, sweep);

        std::printf("%-6s %-10s %-14s %-14s %-10s\n", "bits", "ratio", "payload_bytes", "mse",
                    "elapsed_ms");
        for (size_t i = 0; i < reports.size(); ++i) {
            std::printf("%-6d %-10.4f %-14llu %-14.6e %-10.3f\n", targets[i],
                        reports[i].compression_ratio,
                        (unsigned long long)reports[i].payload_bytes,
                        reports[i].reconstruction_mse, reports[i].elapsed.count());
        }

        if (!csv_path.empty()) {
            std::ofstream csv(csv_path);
            if (!csv) throw IoError("cannot open " + csv_path + " for writing");
            csv << "bits,ratio,payload_bytes,mse,elapsed_ms\n";
            for (size_t i = 0; i < reports.size(); ++i) {
                csv << targets[i] << "," << reports[i].compression_ratio << ","
                    << reports[i].payload_bytes << "," << reports[i].reconstruction_mse << ","
                    << reports[i].elapsed.count() << "\n";
            }
        }
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "bench: %s\n", e.what());
        return kExitInput;
    }
}

int cmd_calibrate(const std::string& cache_path, const std::string& out_path,
                  const std::string& mode_name) {
    try {
        const KvCache cache = load_cache(cache_path);
        CalibrationMode mode;
        if (mode_name == "scalar") {
            mode = CalibrationMode::Scalar;
        } else if (mode_name == "per-dim") {
            mode = CalibrationMode::PerDimension;
        } else {
            std::fprintf(stderr, "calibrate: mode must be 'scalar' or 'per-dim'\n");
            return kExitInput;
        }
        const CalibrationProfile profile = compute_profile({cache}, mode);
        save_profile(profile, out_path);
        std::printf("model_id=%s\n", profile.model_id.c_str());
        std::printf("layers=%zu\n", profile.num_layers());
        std::printf("mode=%s\n", mode_name.c_str());
        std::printf("out=%s\n", out_path.c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "calibrate: %s\n", e.what());
        return kExitInput;
    }
}

int cmd_extract(const std::string& text_path, int64_t budget) {
    try {
        if (budget < 1) {
            std::fprintf(stderr, "extract: budget must be >= 1\n");
            return kExitInput;
        }
        const std::string text = read_text_file(text_path);
        const ContentType type = detect_content_type(text);
        const std::vector<Fact> facts = extract_facts(text, size_t(budget));
        std::printf("content_type=%s\n",
                    type == ContentType::Structured ? "structured" : "general");
        std::printf("facts=%zu\n", facts.size());
        if (!facts.empty()) std::printf("%s\n", format_facts_summary(facts).c_str());
        return kExitOk;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "extract: %s\n", e.what());
        return kExitInput;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Q-KVComm: compressed KV cache transmission between model agents"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "config file (default: $QKVCOMM_CONFIG)")
        ->configurable(false);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic cache file from a spec config");
    std::string gen_spec, gen_out = "cache.qkvt";
    int64_t gen_seed = -1;
    gen->add_option("--spec", gen_spec, "synthetic spec config file")->required();
    gen->add_option("--out", gen_out, "output cache file");
    gen->add_option("--seed", gen_seed, "override the spec seed");

    // profile
    auto* profile = app.add_subcommand("profile", "per-layer quantization sensitivity");
    std::string profile_cache;
    int profile_probe = 0;
    profile->add_option("cache", profile_cache, "cache file")->required();
    profile->add_option("--probe-bits", profile_probe, "probe bit width (default: min_bits)");

    // compress
    auto* compress = app.add_subcommand("compress", "compress a cache file into a payload");
    std::string compress_cache, compress_out, compress_context, compress_spill;
    int compress_bits = 0;
    double compress_ratio = 0.0;
    int64_t compress_seed = -1;
    compress->add_option("cache", compress_cache, "cache file")->required();
    compress->add_option("--out", compress_out, "output payload file (default: <cache>.qkvc)");
    compress->add_option("--context", compress_context, "context text file for fact extraction");
    compress->add_option("--bits", compress_bits, "target bit width override");
    compress->add_option("--ratio", compress_ratio, "layer selection ratio override");
    compress->add_option("--seed", compress_seed, "attention generator seed");
    compress->add_option("--spill-dir", compress_spill, "fact cache spill directory");

    // decompress
    auto* decompress = app.add_subcommand("decompress", "reconstruct a cache from a payload");
    std::string decompress_in, decompress_out, decompress_facts;
    decompress->add_option("payload", decompress_in, "payload file")->required();
    decompress->add_option("--out", decompress_out, "output cache file (default: <payload>.qkvt)");
    decompress->add_option("--facts-out", decompress_facts, "write the facts summary here");

    // send
    auto* send_cmd = app.add_subcommand("send", "stream a payload to a server");
    std::string send_address, send_cache, send_context;
    int send_bits = 0;
    double send_ratio = 0.0;
    int64_t send_seed = -1;
    send_cmd->add_option("--address", send_address, "server host:port")->required();
    send_cmd->add_option("cache", send_cache, "cache file")->required();
    send_cmd->add_option("--context", send_context, "context text file");
    send_cmd->add_option("--bits", send_bits, "target bit width override");
    send_cmd->add_option("--ratio", send_ratio, "layer selection ratio override");
    send_cmd->add_option("--seed", send_seed, "attention generator seed");

    // serve
    auto* serve = app.add_subcommand("serve", "receive payloads and write reconstructed caches");
    std::string serve_address, serve_out = "received";
    uint64_t serve_max = 0;
    serve->add_option("--address", serve_address, "listen host:port")->required();
    serve->add_option("--out-dir", serve_out, "output directory");
    serve->add_option("--max-frames", serve_max, "exit after this many frames (0 = run forever)");

    // bench
    auto* bench = app.add_subcommand("bench", "compression sweep over target bit widths");
    std::string bench_spec, bench_bits = "4,6,8", bench_csv;
    bench->add_option("--spec", bench_spec, "synthetic spec config file")->required();
    bench->add_option("--bits", bench_bits, "comma-separated target bit widths");
    bench->add_option("--out", bench_csv, "also write a CSV file");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "compute a calibration profile");
    std::string calibrate_cache, calibrate_out = "profile.qkvp", calibrate_mode = "scalar";
    calibrate->add_option("cache", calibrate_cache, "cache file")->required();
    calibrate->add_option("--out", calibrate_out, "output profile file");
    calibrate->add_option("--mode", calibrate_mode, "scalar or per-dim");

    // extract
    auto* extract = app.add_subcommand("extract", "extract salient facts from a text file");
    std::string extract_text;
    int64_t extract_budget = 16;
    extract->add_option("text", extract_text, "text file")->required();
    extract->add_option("--budget", extract_budget, "maximum number of facts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitInput;
    }

    if (gen->parsed()) return cmd_gen(gen_spec, gen_out, gen_seed);
    if (profile->parsed()) return cmd_profile(profile_cache, profile_probe, config_path);
    if (compress->parsed())
        return cmd_compress(compress_cache, config_path, compress_out, compress_context,
                            compress_bits, compress_ratio, compress_seed, compress_spill);
    if (decompress->parsed())
        return cmd_decompress(decompress_in, decompress_out, config_path, decompress_facts);
    if (send_cmd->parsed())
        return cmd_send(send_address, send_cache, config_path, send_context, send_bits,
                        send_ratio, send_seed);
    if (serve->parsed()) return cmd_serve(serve_address, serve_out, config_path, serve_max);
    if (bench->parsed()) return cmd_bench(bench_spec, bench_bits, bench_csv, config_path);
    if (calibrate->parsed()) return cmd_calibrate(calibrate_cache, calibrate_out, calibrate_mode);
    if (extract->parsed()) return cmd_extract(extract_text, extract_budget);
    return kExitInput;
}
