#include "ikit.h"

#include "core/client.hpp"
#include "core/common.hpp"
#include "core/pipeline.hpp"
#include "core/retrieval.hpp"

#include <cstring>
#include <new>
#include <string>

namespace {

thread_local std::string g_last_error;

char * dup_string(const std::string & s) {
    char * out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

template <typename Fn>
ikit_status guarded(Fn && fn) {
    try {
        fn();
        g_last_error.clear();
        return IKIT_OK;
    } catch (const ikit::ValidationError & e) {
        g_last_error = e.what();
        return IKIT_EINVAL;
    } catch (const std::exception & e) {
        g_last_error = e.what();
        return IKIT_ERUNTIME;
    }
}

}  // namespace

struct ikit_index {
    ikit::EmbeddingIndex impl;
};

struct ikit_stub_server {
    ikit::StubServer impl;
    explicit ikit_stub_server(ikit::StubModel model) : impl(std::move(model)) {}
};

extern "C" {

const char * ikit_last_error(void) {
    return g_last_error.c_str();
}

void ikit_string_free(char * s) {
    delete[] s;
}

ikit_status ikit_run_stage(const char * stage, const char * config_json, char ** result_json) {
    return guarded([&] {
        if (stage == nullptr || config_json == nullptr) {
            throw ikit::ValidationError("ikit_run_stage: null argument");
        }
        nlohmann::json cfg;
        try {
            cfg = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::exception & e) {
            throw ikit::ValidationError(std::string("config is not valid JSON: ") + e.what());
        }
        const nlohmann::json result = ikit::pipeline::run_stage(stage, cfg);
        if (result_json != nullptr) {
            *result_json = dup_string(result.dump());
        }
    });
}

ikit_status ikit_index_open(const char * vectors_path, const char * ids_path, ikit_index ** out) {
    return guarded([&] {
        if (vectors_path == nullptr || ids_path == nullptr || out == nullptr) {
            throw ikit::ValidationError("ikit_index_open: null argument");
        }
        *out = new ikit_index{ikit::EmbeddingIndex::load(vectors_path, ids_path)};
    });
}

void ikit_index_close(ikit_index * index) {
    delete index;
}

ikit_status ikit_index_size(const ikit_index * index, size_t * out) {
    return guarded([&] {
        if (index == nullptr || out == nullptr) {
            throw ikit::ValidationError("ikit_index_size: null argument");
        }
        *out = index->impl.size();
    });
}

ikit_status ikit_index_dim(const ikit_index * index, size_t * out) {
    return guarded([&] {
        if (index == nullptr || out == nullptr) {
            throw ikit::ValidationError("ikit_index_dim: null argument");
        }
        *out = index->impl.dim();
    });
}

ikit_status ikit_index_topk(const ikit_index * index, const float * query, size_t dim, size_t k,
                            char ** result_json) {
    return guarded([&] {
        if (index == nullptr || query == nullptr || result_json == nullptr) {
            throw ikit::ValidationError("ikit_index_topk: null argument");
        }
        const std::vector<float> q(query, query + dim);
        nlohmann::json hits = nlohmann::json::array();
        for (const auto & hit : index->impl.topk(q, k)) {
            hits.push_back({{"id", hit.id}, {"sim", hit.sim}});
        }
        *result_json = dup_string(hits.dump());
    });
}

ikit_status ikit_stub_server_start(const char * spec_path, int port, ikit_stub_server ** out,
                                   int * bound_port) {
    return guarded([&] {
        if (spec_path == nullptr || out == nullptr) {
            throw ikit::ValidationError("ikit_stub_server_start: null argument");
        }
        auto server = std::make_unique<ikit_stub_server>(ikit::StubModel::from_spec_file(spec_path));
        const int bound = server->impl.start(port);
        if (bound_port != nullptr) {
            *bound_port = bound;
        }
        *out = server.release();
    });
}

void ikit_stub_server_stop(ikit_stub_server * server) {
    if (server != nullptr) {
        server->impl.stop();
        delete server;
    }
}

}  // extern "C"
