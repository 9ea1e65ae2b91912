// forecaster: serve | worker | run | synth
#include "forecaster/api/service.hpp"
#include "forecaster/ingest/csv.hpp"
#include "forecaster/ingest/dataset.hpp"
#include "forecaster/jobs/runner.hpp"
#include "forecaster/jobs/worker.hpp"
#include "forecaster/llm/chat.hpp"
#include "forecaster/store/factory.hpp"
#include "forecaster/store/metadata_store.hpp"
#include "forecaster/testing/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace forecaster;

namespace {

std::atomic<bool> g_stop{false};
httplib::Server *g_server = nullptr;

void on_signal(int) {
	g_stop = true;
	if (g_server) {
		g_server->stop();
	}
}

std::string env_or(const char *key, const std::string &fallback) {
	const char *v = std::getenv(key);
	return v && *v ? std::string(v) : fallback;
}

std::string read_file(const std::string &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw std::runtime_error("cannot read '" + path + "'");
	}
	std::ostringstream ss;
	ss << in.rdbuf();
	return ss.str();
}

void write_file(const fs::path &path, const std::string &body) {
	if (path.has_parent_path()) {
		fs::create_directories(path.parent_path());
	}
	std::ofstream out(path, std::ios::binary);
	out << body;
	if (!out) {
		throw std::runtime_error("cannot write '" + path.string() + "'");
	}
}

// "2s", "500ms", "1m", or a bare number of seconds
std::chrono::milliseconds parse_duration(const std::string &s) {
	static const std::regex re(R"(^\s*([0-9]*\.?[0-9]+)\s*(ms|s|m)?\s*$)");
	std::smatch m;
	if (!std::regex_match(s, m, re)) {
		throw CLI::ValidationError("poll-interval", "expected a duration like 2s or 500ms");
	}
	const double v = std::stod(m[1]);
	const std::string unit = m[2].matched ? m[2].str() : "s";
	const double ms = unit == "ms" ? v : unit == "m" ? v * 60000.0 : v * 1000.0;
	return std::chrono::milliseconds(static_cast<long long>(ms));
}

std::pair<std::string, int> split_addr(const std::string &addr) {
	const auto colon = addr.rfind(':');
	if (colon == std::string::npos) {
		return {addr, 8080};
	}
	return {addr.substr(0, colon), std::stoi(addr.substr(colon + 1))};
}

int cmd_serve(const std::string &addr_opt, const std::string &config_path) {
	json cfg = json::object();
	if (!config_path.empty()) {
		cfg = json::parse(read_file(config_path));
	}
	const fs::path base = config_path.empty() ? fs::current_path() : fs::absolute(config_path).parent_path();
	auto resolve = [&](const std::string &p) {
		if (p.empty() || p == ":memory:" || p == "memory:" || p.find("://") != std::string::npos) {
			return p;
		}
		return fs::path(p).is_absolute() ? p : (base / p).string();
	};

	const std::string addr = !addr_opt.empty() ? addr_opt : cfg.value("addr", "127.0.0.1:8080");
	const std::string db_path = resolve(cfg.value("metadata_db", "forecaster.db"));
	const std::string store_url = env_or("STORE_URL", resolve(cfg.value("store_url", "store")));
	const std::string tokens_path = env_or("API_TOKENS_FILE", resolve(cfg.value("tokens_file", "tokens.json")));

	api::ServiceOptions opts;
	opts.max_upload_bytes = cfg.value("max_upload_bytes", opts.max_upload_bytes);
	opts.staleness_ms = cfg.value("staleness_seconds", opts.staleness_ms / 1000) * 1000;
	opts.llm = llm::LlmConfig::from_env();

	store::MetadataStore meta(db_path);
	auto objects = store::make_object_store(store_url);
	api::ApiService service(meta, *objects, api::TokenStore::load(tokens_path), opts);

	httplib::Server srv;
	const int threads = cfg.value("threads", 8);
	srv.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
	service.register_routes(srv);
	g_server = &srv;

	const auto [host, port] = split_addr(addr);
	std::cerr << "serving on " << host << ":" << port << " (store " << store_url << ", db " << db_path << ")\n";
	if (!srv.listen(host, port)) {
		std::cerr << "cannot listen on " << addr << "\n";
		return 1;
	}
	return 0;
}

int cmd_worker(const std::string &api_url, const std::string &token, const std::string &poll,
               const std::string &store_opt, std::string worker_id) {
	jobs::WorkerOptions opts;
	opts.api_url = api_url;
	opts.token = token.empty() ? env_or("API_TOKEN", "") : token;
	opts.poll_interval = parse_duration(poll);
	if (worker_id.empty()) {
		worker_id = random_id("w_");
	}
	opts.worker_id = worker_id;
	if (opts.token.empty()) {
		std::cerr << "a worker token is required (--token or API_TOKEN)\n";
		return 2;
	}
	const std::string store_url = !store_opt.empty() ? store_opt : env_or("STORE_URL", "store");
	auto objects = store::make_object_store(store_url);
	jobs::Worker worker(opts, *objects);
	std::cerr << "worker " << worker_id << " polling " << api_url << "\n";
	worker.run(g_stop);
	return 0;
}

class StderrProgress final : public jobs::ProgressSink {
public:
	void on_progress(int done, int total, const std::vector<std::string> &lines) override {
		for (const auto &l : lines) {
			std::cerr << "  " << l << "\n";
		}
		std::cerr << "[" << done << "/" << total << "]\n";
	}
};

int cmd_run(const std::string &dataset, const std::string &roles_path, const std::string &config_path,
            const std::string &out_dir, const std::string &job_id) {
	const std::string csv = read_file(dataset);
	const auto table = ingest::parse_csv(csv);

	ingest::DatasetRecord rec;
	rec.dataset_id = "local";
	rec.owner_id = "local";
	rec.filename = fs::path(dataset).filename().string();
	rec.byte_size = csv.size();
	rec.row_count = table.rows.size();
	rec.columns = ingest::extract_schema(table);
	rec.roles = ingest::RoleAssignment::from_json(json::parse(read_file(roles_path)));

	jobs::JobRecord job;
	job.job_id = job_id;
	job.kind = jobs::JobKind::Train;
	job.dataset_id = rec.dataset_id;
	job.params = json::parse(read_file(config_path));

	store::MemoryStore objects;
	StderrProgress progress;
	const json results = jobs::execute_training(job, rec, csv, objects, progress);

	const fs::path out(out_dir);
	write_file(out / "results.json", objects.get_or_throw(jobs::results_key(job_id)));
	const std::string prefix = job_id + "/models/";
	for (const auto &key : objects.list(prefix)) {
		write_file(out / "models" / key.substr(prefix.size()), objects.get_or_throw(key));
	}
	std::cerr << "status " << results.value("status", "?") << "; wrote " << (out / "results.json").string() << "\n";
	return results.value("status", "") == "failed" ? 1 : 0;
}

int cmd_synth(const std::string &out, int days, std::uint64_t seed) {
	const auto table = testing::bike_like(days, seed);
	write_file(out, ingest::write_csv(table));
	return 0;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"Time-series forecasting service"};
	app.require_subcommand(1);

	std::string addr, config;
	auto *serve = app.add_subcommand("serve", "run the REST service");
	serve->add_option("--addr", addr, "host:port");
	serve->add_option("--config", config, "service config JSON");

	std::string api_url = "http://127.0.0.1:8080", token, poll = "2s", store_url, worker_id;
	auto *worker = app.add_subcommand("worker", "poll the queue and run jobs");
	worker->add_option("--api-url", api_url, "service base URL");
	worker->add_option("--token", token, "worker bearer token (default: $API_TOKEN)");
	worker->add_option("--poll-interval", poll, "idle poll interval, e.g. 2s");
	worker->add_option("--store", store_url, "object store path or s3 URL (default: $STORE_URL)");
	worker->add_option("--worker-id", worker_id, "stable worker id (default: random)");

	std::string dataset, roles, job_config, out_dir, job_id = "run";
	auto *run = app.add_subcommand("run", "train in-process without the queue");
	run->add_option("--dataset", dataset, "CSV file")->required()->check(CLI::ExistingFile);
	run->add_option("--roles", roles, "role assignment JSON")->required()->check(CLI::ExistingFile);
	run->add_option("--config", job_config, "job params JSON")->required()->check(CLI::ExistingFile);
	run->add_option("--out", out_dir, "output directory")->required();
	run->add_option("--job-id", job_id, "job id used for seeding and artifact names");

	std::string synth_out;
	int days = 1000;
	std::uint64_t seed = 7;
	auto *synth = app.add_subcommand("synth", "write the synthetic daily bike-share CSV");
	synth->add_option("--out", synth_out, "output CSV")->required();
	synth->add_option("--days", days, "rows");
	synth->add_option("--seed", seed, "RNG seed");

	CLI11_PARSE(app, argc, argv);

	std::signal(SIGINT, on_signal);
	std::signal(SIGTERM, on_signal);
	try {
		if (*serve) {
			return cmd_serve(addr, config);
		}
		if (*worker) {
			return cmd_worker(api_url, token, poll, store_url, worker_id);
		}
		if (*run) {
			return cmd_run(dataset, roles, job_config, out_dir, job_id);
		}
		if (*synth) {
			return cmd_synth(synth_out, days, seed);
		}
	} catch (const Error &e) {
		std::cerr << "error: " << to_string(e.code()) << ": " << e.message();
		if (!e.field().empty()) {
			std::cerr << " (" << e.field() << ")";
		}
		std::cerr << "\n";
		return 1;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
	return 0;
}
