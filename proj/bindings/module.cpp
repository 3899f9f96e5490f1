#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <optional>
#include <stdexcept>

#include "wirevid/alloc.hpp"
#include "wirevid/channel.hpp"
#include "wirevid/codec.hpp"
#include "wirevid/harness.hpp"
#include "wirevid/image_io.hpp"
#include "wirevid/metrics.hpp"
#include "wirevid/synth.hpp"
#include "wirevid/video.hpp"

namespace py = pybind11;
using namespace wirevid;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Frame frame_from(const FloatArray& a) {
    if (a.ndim() != 3 || a.shape(0) != 3)
        throw std::invalid_argument("frame arrays are (3, h, w)");
    Frame f = make_frame((int)a.shape(1), (int)a.shape(2));
    std::memcpy(f.chw.data(), a.data(), f.chw.size() * sizeof(float));
    return f;
}

py::array_t<float> to_array(const Frame& f) {
    py::array_t<float> a({(py::ssize_t)3, (py::ssize_t)f.h, (py::ssize_t)f.w});
    std::memcpy(a.mutable_data(), f.chw.data(), f.chw.size() * sizeof(float));
    return a;
}

Tensor tensor_from(const FloatArray& a) {
    std::vector<int> shape(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); i++) shape[i] = (int)a.shape(i);
    std::vector<float> v((size_t)a.size());
    std::memcpy(v.data(), a.data(), v.size() * sizeof(float));
    return constant(std::move(shape), std::move(v));
}

py::array_t<float> to_array(const Tensor& t) {
    std::vector<py::ssize_t> shape(t->shape.begin(), t->shape.end());
    py::array_t<float> a(shape);
    std::memcpy(a.mutable_data(), t->val.data(), t->val.size() * sizeof(float));
    return a;
}

ChannelModel make_channel(double power, double sigma2, double sigma2_est) {
    ChannelModel ch;
    ch.power = power;
    ch.sigma2 = sigma2;
    ch.sigma2_est = sigma2_est;
    ch.validate();
    return ch;
}

// model + convenience wrappers over the transmission entry points
struct PyCodec {
    ModelParams p;

    explicit PyCodec(const CodecConfig& cfg, uint64_t seed) {
        Rng rng = Rng(seed).stream("init");
        p = ModelParams(cfg, rng);
    }
    explicit PyCodec(ModelParams m) : p(std::move(m)) {}

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& t : p.all_params()) n += t->numel();
        return n;
    }

    py::array_t<float> encode_key(const FloatArray& x, float snr_db) const {
        return to_array(encode_key_frame(p, tensor_from(x), snr_db));
    }
    py::array_t<float> decode_key(const FloatArray& z, float snr_db) const {
        return to_array(decode_key_frame(p, tensor_from(z), snr_db));
    }

    py::array_t<float> emulate(const FloatArray& x, int v, double power,
                               double sigma2_est, uint64_t seed) const {
        ChannelModel ch = make_channel(power, sigma2_est, sigma2_est);
        Rng emul = Rng(seed).stream("emul");
        return to_array(emulate_reference(p, tensor_from(x), v, ch, emul));
    }

    py::tuple transmit_key(const FloatArray& x, int v, double power, double sigma2,
                           double sigma2_est, uint64_t seed) const {
        ChannelModel ch = make_channel(power, sigma2, sigma2_est);
        Rng chan = Rng(seed).stream("chan");
        Rng emul = Rng(seed).stream("emul");
        KeyTransmitResult r = transmit_key_frame(p, tensor_from(x), v, ch, chan, emul);
        return py::make_tuple(to_array(r.receiver), to_array(r.emulated));
    }

    py::tuple transmit_group(const FloatArray& ref0_tx, const FloatArray& ref0_rx,
                             const std::vector<FloatArray>& frames,
                             const std::vector<int>& alloc, double power, double sigma2,
                             double sigma2_est, uint64_t seed) const {
        ChannelModel ch = make_channel(power, sigma2, sigma2_est);
        Rng chan = Rng(seed).stream("chan");
        Rng emul = Rng(seed).stream("emul");
        std::vector<Tensor> fr;
        fr.reserve(frames.size());
        for (const auto& f : frames) fr.push_back(tensor_from(f));
        GopResult r = transmit_gop(p, tensor_from(ref0_tx), tensor_from(ref0_rx), fr,
                                   alloc, ch, chan, emul);
        py::list recv, emu;
        for (const auto& t : r.receiver) recv.append(to_array(t));
        for (const auto& t : r.emulated) emu.append(t ? py::object(to_array(t))
                                                      : py::object(py::none()));
        return py::make_tuple(recv, emu);
    }
};

py::dict record_dict(const EvalRecord& r) {
    py::dict d;
    d["snr_test"] = r.snr_test;
    d["snr_est"] = r.snr_est;
    d["policy"] = r.policy;
    d["metric"] = r.metric;
    d["mean"] = r.mean;
    d["std"] = r.std_dev;
    return d;
}

EvalRecord record_from(const py::dict& d) {
    EvalRecord r;
    r.snr_test = d["snr_test"].cast<double>();
    r.snr_est = d["snr_est"].cast<double>();
    r.policy = d["policy"].cast<std::string>();
    r.metric = d["metric"].cast<std::string>();
    r.mean = d["mean"].cast<double>();
    r.std_dev = d["std"].cast<double>();
    return r;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "learned joint source-channel video transmission over noisy channels";

    // ---- channel ----
    m.def("snr_db", &snr_db, py::arg("power"), py::arg("sigma2"));
    m.def("noise_power_for_snr", &noise_power_for_snr, py::arg("power"),
          py::arg("snr_db"));
    m.def("cond_snr_db", &cond_snr_db, py::arg("power"), py::arg("sigma2_est"),
          "dB value fed to the SNR-conditioned layers, saturating at 60 dB");

    m.def(
        "power_normalize",
        [](const FloatArray& reals, double power) {
            if (reals.ndim() != 1) throw std::invalid_argument("reals must be 1-d");
            std::vector<float> v((size_t)reals.size());
            std::memcpy(v.data(), reals.data(), v.size() * sizeof(float));
            LatentCode z = pair_real_to_complex(v, 1, 1);
            power_normalize(z, power);
            auto out = unpair_to_reals(z);
            py::array_t<float> a((py::ssize_t)out.size());
            std::memcpy(a.mutable_data(), out.data(), out.size() * sizeof(float));
            return a;
        },
        py::arg("reals"), py::arg("power") = 1.0,
        "scale interleaved (re, im) reals so the mean complex-symbol power is `power`");

    m.def(
        "transmit",
        [](const FloatArray& reals, int blocks, int v, double power, double sigma2,
           uint64_t seed) {
            if (reals.ndim() != 1) throw std::invalid_argument("reals must be 1-d");
            std::vector<float> in((size_t)reals.size());
            std::memcpy(in.data(), reals.data(), in.size() * sizeof(float));
            auto mask = block_mask((int)in.size(), blocks, v);
            for (size_t i = 0; i < in.size(); i++) in[i] *= mask[i];
            std::vector<float> out;
            if (v == 0) {
                out = std::move(in);
            } else {
                LatentCode z = pair_real_to_complex(in, blocks, v);
                power_normalize(z, power);
                Rng chan = Rng(seed).stream("chan");
                transmit_awgn(z, sigma2, chan);
                out = unpair_to_reals(z);
            }
            py::array_t<float> a((py::ssize_t)out.size());
            std::memcpy(a.mutable_data(), out.data(), out.size() * sizeof(float));
            return a;
        },
        py::arg("reals"), py::arg("blocks"), py::arg("v"), py::arg("power") = 1.0,
        py::arg("sigma2") = 0.0, py::arg("seed") = 1,
        "truncate to the first v of `blocks` refinement blocks, normalize, add noise");

    // ---- metrics ----
    m.def(
        "mse", [](const FloatArray& a, const FloatArray& b) {
            return mse_value(frame_from(a), frame_from(b));
        },
        py::arg("x"), py::arg("xhat"));
    m.def("psnr_db", &psnr_db, py::arg("mse"));
    m.def(
        "ms_ssim",
        [](const FloatArray& a, const FloatArray& b, int levels) {
            return ms_ssim_value(frame_from(a), frame_from(b), levels);
        },
        py::arg("x"), py::arg("xhat"), py::arg("levels") = 5);
    m.def("max_msssim_levels", &max_msssim_levels, py::arg("h"), py::arg("w"));
    m.def("msssim_weights", &msssim_weights, py::arg("levels"));

    // ---- frames and clips ----
    m.def(
        "read_ppm", [](const std::string& path) { return to_array(read_ppm(path)); },
        py::arg("path"));
    m.def(
        "write_ppm",
        [](const FloatArray& f, const std::string& path) {
            write_ppm(frame_from(f), path);
        },
        py::arg("frame"), py::arg("path"));
    m.def("interpolation_schedule", &interpolation_schedule, py::arg("n"),
          "dyadic (frame, reference offset) visit order for one group");
    m.def(
        "synth_clip",
        [](uint64_t seed, int frames, int h, int w) {
            auto clip = synth_clip(seed, frames, h, w);
            py::array_t<float> a(
                {(py::ssize_t)clip.size(), (py::ssize_t)3, (py::ssize_t)h,
                 (py::ssize_t)w});
            float* dst = a.mutable_data();
            for (const auto& f : clip) {
                std::memcpy(dst, f.chw.data(), f.chw.size() * sizeof(float));
                dst += f.chw.size();
            }
            return a;
        },
        py::arg("seed"), py::arg("frames"), py::arg("h"), py::arg("w"),
        "procedural moving-shape clip as a (t, 3, h, w) array");

    // ---- allocation ----
    m.def("count_actions", &count_actions, py::arg("n"), py::arg("budget"));
    m.def("enumerate_actions", &enumerate_actions, py::arg("n"), py::arg("budget"));
    m.def("uniform_action", &uniform_action, py::arg("n"), py::arg("budget"));
    m.def(
        "epsilon_schedule",
        [](int episode, double eps0, double eps_end, double lam) {
            DqnConfig c;
            c.eps0 = eps0;
            c.eps_end = eps_end;
            c.eps_lambda = lam;
            return epsilon_schedule(c, episode);
        },
        py::arg("episode"), py::arg("eps0") = 0.9, py::arg("eps_end") = 0.05,
        py::arg("lam") = 1000.0);

    m.def("snr_grid", &snr_grid, py::arg("lo"), py::arg("hi"), py::arg("step"));

    // ---- codec ----
    py::class_<CodecConfig>(m, "CodecConfig")
        .def(py::init([](int channels, int gop, int blocks, int hidden, float ssf_sigma0,
                         int ssf_levels) {
                 CodecConfig c;
                 c.channels = channels;
                 c.gop = gop;
                 c.blocks = blocks;
                 c.hidden = hidden;
                 c.ssf_sigma0 = ssf_sigma0;
                 c.ssf_levels = ssf_levels;
                 return c;
             }),
             py::arg("channels") = 48, py::arg("gop") = 4, py::arg("blocks") = 20,
             py::arg("hidden") = 64, py::arg("ssf_sigma0") = 1.5f,
             py::arg("ssf_levels") = 5)
        .def_readonly("channels", &CodecConfig::channels)
        .def_readonly("gop", &CodecConfig::gop)
        .def_readonly("blocks", &CodecConfig::blocks)
        .def_readonly("hidden", &CodecConfig::hidden)
        .def("latent_symbols", &CodecConfig::latent_symbols, py::arg("h"), py::arg("w"))
        .def("bandwidth_ratio", &CodecConfig::bandwidth_ratio, py::arg("h"),
             py::arg("w"))
        .def("validate", &CodecConfig::validate, py::arg("h"), py::arg("w"));

    py::class_<PyCodec>(m, "Codec")
        .def(py::init<const CodecConfig&, uint64_t>(), py::arg("config"),
             py::arg("seed") = 1)
        .def_property_readonly("config", [](const PyCodec& c) { return c.p.cfg; })
        .def_property_readonly("param_count", &PyCodec::param_count)
        .def("save",
             [](const PyCodec& c, const std::string& path) { save_model(path, c.p); })
        .def_static("load",
                    [](const std::string& path) { return PyCodec(load_model(path)); })
        .def("encode_key", &PyCodec::encode_key, py::arg("frame"), py::arg("snr_db"))
        .def("decode_key", &PyCodec::decode_key, py::arg("latent"), py::arg("snr_db"))
        .def("emulate_reference", &PyCodec::emulate, py::arg("frame"), py::arg("v"),
             py::arg("power") = 1.0, py::arg("sigma2_est") = 0.0, py::arg("seed") = 1,
             "the transmitter's estimate of the receiver's key reconstruction")
        .def("transmit_key", &PyCodec::transmit_key, py::arg("frame"), py::arg("v"),
             py::arg("power") = 1.0, py::arg("sigma2") = 0.0,
             py::arg("sigma2_est") = 0.0, py::arg("seed") = 1,
             "returns (receiver, emulated) reconstructions of one key frame")
        .def("transmit_group", &PyCodec::transmit_group, py::arg("ref0_tx"),
             py::arg("ref0_rx"), py::arg("frames"), py::arg("alloc"),
             py::arg("power") = 1.0, py::arg("sigma2") = 0.0,
             py::arg("sigma2_est") = 0.0, py::arg("seed") = 1,
             "alloc[i] buys blocks for frame i+1; alloc[-1] is the key frame's");

    // ---- evaluation harness ----
    m.def(
        "evaluate_sweep",
        [](const std::string& model, const std::string& manifest,
           const std::string& split, std::vector<double> snrs,
           std::optional<double> snr_est, std::vector<std::string> metrics,
           const std::string& alloc, int budget, int crop, uint64_t seed) {
            ModelParams p = load_model(model);
            DatasetManifest data = read_manifest(manifest);
            EvalOptions opt;
            opt.snr_grid = std::move(snrs);
            opt.snr_est = snr_est;
            opt.metrics.clear();
            for (const auto& s : metrics) opt.metrics.push_back(parse_metric(s));
            opt.crop_h = opt.crop_w = crop;
            opt.seed = seed;
            QNet qn;
            const QNet* qp = nullptr;
            if (!alloc.empty()) {
                LoadedQNet lq = load_qnet(alloc);
                qn = std::move(lq.net);
                opt.budget = lq.budget;
                opt.learned = true;
                qp = &qn;
            } else {
                opt.budget = budget;
            }
            auto recs = evaluate_sweep(p, qp, data, parse_split(split), opt);
            py::list out;
            for (const auto& r : recs) out.append(record_dict(r));
            return out;
        },
        py::arg("model"), py::arg("manifest"), py::arg("split") = "test",
        py::arg("snrs") = std::vector<double>{0.0, 10.0, 20.0},
        py::arg("snr_est") = std::nullopt,
        py::arg("metrics") = std::vector<std::string>{"psnr", "ms-ssim"},
        py::arg("alloc") = "", py::arg("budget") = 0, py::arg("crop") = 0,
        py::arg("seed") = 1,
        "sweep the test channel over a manifest split; one record per "
        "(snr, policy, metric), uniform unless an allocation policy is given");

    m.def(
        "write_outputs",
        [](const py::list& records, const std::string& out_dir) {
            std::vector<EvalRecord> recs;
            for (const auto& r : records) recs.push_back(record_from(r.cast<py::dict>()));
            emit_outputs(recs, out_dir);
        },
        py::arg("records"), py::arg("out_dir"),
        "records.csv plus one SVG curve per metric, byte-stable across reruns");
}
