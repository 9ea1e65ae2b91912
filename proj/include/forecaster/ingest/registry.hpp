#pragma once

#include "forecaster/common/clock.hpp"
#include "forecaster/common/error.hpp"
#include "forecaster/ingest/csv.hpp"
#include "forecaster/ingest/dataset.hpp"
#include "forecaster/series/bundle.hpp"
#include "forecaster/store/metadata_store.hpp"
#include "forecaster/store/object_store.hpp"

#include <string>
#include <string_view>

namespace forecaster::ingest {

// Dataset lifecycle over the two stores: the metadata row is the source of
// truth for ownership and the unique (owner, filename) constraint; the raw
// bytes live in the object store under "{owner_id}/{filename}".
class DatasetRegistry {
public:
	DatasetRegistry(store::MetadataStore &meta, store::ObjectStore &objects,
	                std::size_t max_bytes = kDefaultMaxUploadBytes)
	    : meta_(meta), objects_(objects), max_bytes_(max_bytes) {}

	DatasetRecord validate_and_register(std::string_view raw, const std::string &owner_id,
	                                    const std::string &filename) {
		if (raw.size() > max_bytes_) {
			throw Error(ErrorCode::TooLarge,
			            "upload is " + std::to_string(raw.size()) + " bytes; the limit is " + std::to_string(max_bytes_),
			            "file");
		}
		validate_filename(filename);
		const CsvTable table = parse_csv(raw);
		DatasetRecord rec;
		rec.dataset_id = random_id("ds_");
		rec.owner_id = owner_id;
		rec.filename = filename;
		rec.uploaded_at = format_timestamp_ms(meta_.now_ms());
		rec.byte_size = raw.size();
		rec.row_count = table.rows.size();
		rec.columns = extract_schema(table);
		meta_.touch_user(owner_id);
		meta_.insert_dataset(rec);
		try {
			objects_.put(rec.object_key(), raw);
		} catch (...) {
			meta_.delete_dataset(rec.dataset_id);
			throw;
		}
		return rec;
	}

	DatasetRecord get(const std::string &dataset_id) const {
		auto rec = meta_.get_dataset(dataset_id);
		if (!rec) {
			throw Error(ErrorCode::DatasetNotFound, "unknown dataset '" + dataset_id + "'", "dataset_id");
		}
		return *rec;
	}

	std::string raw(const DatasetRecord &rec) const {
		auto data = objects_.get(rec.object_key());
		if (!data) {
			throw Error(ErrorCode::StoreError, "dataset file '" + rec.object_key() + "' is missing from the store");
		}
		return std::move(*data);
	}

	CsvTable table(const DatasetRecord &rec) const {
		return parse_csv(raw(rec));
	}

	RoleAssignment assign_roles(const std::string &dataset_id, const RoleAssignment &proposed) {
		const DatasetRecord rec = get(dataset_id);
		const CsvTable t = table(rec);
		RoleAssignment roles = validate_roles(t, rec.columns, proposed);
		// The bundle has to build too, otherwise the job would only fail later.
		series::build_bundle(t, rec.columns, roles);
		meta_.set_roles(dataset_id, roles);
		return roles;
	}

	PlotData plot(const std::string &dataset_id, std::string_view x, const std::vector<std::string> &ys) const {
		const DatasetRecord rec = get(dataset_id);
		return plot_data(table(rec), rec.columns, x, ys);
	}

private:
	store::MetadataStore &meta_;
	store::ObjectStore &objects_;
	std::size_t max_bytes_;
};

} // namespace forecaster::ingest
